//! Quote generation for the four trader strategies.
//!
//! ZIC and OZIC work customer orders with a limit price and never quote at a
//! loss. NZI and ONZI ignore limits: they quote around the previous period's
//! mean price plus a random component scaled by the asset's declining
//! default value.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opinion::Opinion;
use crate::orderbook::{BookSnapshot, Price, TraderId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraderError {
    #[error("opinion {0} outside [-1, 1]")]
    InvalidOpinion(f64),
    #[error("period {t} outside [1, {max}]")]
    InvalidPeriod { t: u32, max: u32 },
    #[error("trader {0} has no limit price")]
    MissingLimit(TraderId),
    #[error("no quote: {0}")]
    NoQuote(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Zic,
    Ozic,
    Nzi,
    Onzi,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Zic, Strategy::Ozic, Strategy::Nzi, Strategy::Onzi];

    /// ZIC and OZIC trade customer orders with limit prices.
    pub fn uses_limit_prices(self) -> bool {
        matches!(self, Strategy::Zic | Strategy::Ozic)
    }

    pub fn is_opinionated(self) -> bool {
        matches!(self, Strategy::Ozic | Strategy::Onzi)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Zic => "zic",
            Strategy::Ozic => "ozic",
            Strategy::Nzi => "nzi",
            Strategy::Onzi => "onzi",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zic" => Ok(Strategy::Zic),
            "ozic" => Ok(Strategy::Ozic),
            "nzi" => Ok(Strategy::Nzi),
            "onzi" => Ok(Strategy::Onzi),
            other => Err(format!(
                "unknown strategy {other:?}, expected zic | ozic | nzi | onzi"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Buyer,
    Seller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraderState {
    pub trader_id: TraderId,
    pub strategy: Strategy,
    pub role: Role,
    /// Cash for NZI/ONZI; accumulated trading surplus for ZIC/OZIC.
    pub balance: f64,
    pub inventory: u32,
    pub limit_price: Option<Price>,
    pub opinion_index: Option<usize>,
}

impl TraderState {
    pub fn new(trader_id: TraderId, strategy: Strategy, role: Role) -> Self {
        Self {
            trader_id,
            strategy,
            role,
            balance: 0.0,
            inventory: 0,
            limit_price: None,
            opinion_index: None,
        }
    }
}

/// Period-level market state seen by NZI and ONZI traders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketContext {
    /// Current trading period, 1-based.
    pub t: u32,
    /// Number of trading periods.
    pub periods: u32,
    /// Expected dividend per unit per period.
    pub expected_dividend: f64,
    /// Default value after the last period.
    pub terminal_value: f64,
    /// Mean trade price of the previous period, 0 before any trading.
    pub prev_mean_price: f64,
    pub k: f64,
    pub alpha: f64,
    pub phi: f64,
}

impl MarketContext {
    /// Calibrated NZI constants with the dividend support {0, 1, 2, 3}.
    pub fn calibrated(periods: u32) -> Self {
        Self {
            t: 1,
            periods,
            expected_dividend: 1.5,
            terminal_value: 40.0,
            prev_mean_price: 0.0,
            k: 4.0846,
            alpha: 0.848,
            phi: 0.0,
        }
    }
}

fn check_opinion(x: f64) -> Result<(), TraderError> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(TraderError::InvalidOpinion(x))
    }
}

/// Half-up rounding to the nearest tick, saturating at the `Price` range.
pub fn round_to_tick(price: f64) -> Price {
    let r = (price + 0.5).floor();
    if r <= 0.0 || r.is_nan() {
        0
    } else if r >= f64::from(Price::MAX) {
        Price::MAX
    } else {
        r as Price
    }
}

fn uniform_int<R: Rng + ?Sized>(lo: Price, hi: Price, rng: &mut R) -> Result<Price, TraderError> {
    if lo > hi {
        return Err(TraderError::NoQuote("empty quote interval"));
    }
    Ok(rng.gen_range(lo..=hi))
}

fn uniform_real<R: Rng + ?Sized>(hi: f64, rng: &mut R) -> f64 {
    if hi > 0.0 {
        rng.gen_range(0.0..=hi)
    } else {
        0.0
    }
}

/// Zero-intelligence-constrained quote. Buyers draw on
/// `[worst bid, limit]`, sellers on `[limit, best ask]`.
pub fn zic_quote<R: Rng + ?Sized>(
    state: &TraderState,
    snap: &BookSnapshot,
    rng: &mut R,
) -> Result<Price, TraderError> {
    let limit = state
        .limit_price
        .ok_or(TraderError::MissingLimit(state.trader_id))?;
    match state.role {
        Role::Buyer => uniform_int(snap.min_quote(), limit, rng),
        Role::Seller => uniform_int(limit, snap.max_quote(), rng),
    }
}

/// Opinion-scaled limit. `bound` is the minimum quote price for buyers and
/// the maximum quote price for sellers.
pub fn ozic_opinionated_limit(
    limit: f64,
    bound: f64,
    x: f64,
    role: Role,
) -> Result<f64, TraderError> {
    check_opinion(x)?;
    Ok(match role {
        Role::Buyer => (limit * (1.0 + x) + bound * (1.0 - x)) / 2.0,
        Role::Seller => (limit * (1.0 - x) + bound * (1.0 + x)) / 2.0,
    })
}

/// Opinionated ZIC quote: buyers draw on `[min quote, OL]`, sellers on
/// `[OL, max quote]`, with the book bounds as in [`zic_quote`].
pub fn ozic_quote<R: Rng + ?Sized>(
    state: &TraderState,
    snap: &BookSnapshot,
    opinion: &Opinion,
    rng: &mut R,
) -> Result<Price, TraderError> {
    check_opinion(opinion.value)?;
    let limit = state
        .limit_price
        .ok_or(TraderError::MissingLimit(state.trader_id))?;
    match state.role {
        Role::Buyer => {
            let lo = snap.min_quote();
            if lo > limit {
                return Err(TraderError::NoQuote("limit below minimum quote"));
            }
            let ol = ozic_opinionated_limit(f64::from(limit), f64::from(lo), opinion.value, Role::Buyer)?;
            // OL lies in [lo, limit]; the floor keeps bids at or under it.
            let hi = (ol.floor() as Price).clamp(lo, limit);
            uniform_int(lo, hi, rng)
        }
        Role::Seller => {
            let hi = snap.max_quote();
            if limit > hi {
                return Err(TraderError::NoQuote("limit above maximum quote"));
            }
            let ol = ozic_opinionated_limit(f64::from(limit), f64::from(hi), opinion.value, Role::Seller)?;
            let lo = (ol.ceil() as Price).clamp(limit, hi);
            uniform_int(lo, hi, rng)
        }
    }
}

/// Default (fundamental) value of the asset at period `t`:
/// `d̄ (T - t + 1) + D_{T+1}`.
pub fn nzi_default_value(ctx: &MarketContext) -> Result<f64, TraderError> {
    default_value_at(ctx, ctx.t)
}

pub fn default_value_at(ctx: &MarketContext, t: u32) -> Result<f64, TraderError> {
    if t < 1 || t > ctx.periods + 1 {
        return Err(TraderError::InvalidPeriod {
            t,
            max: ctx.periods + 1,
        });
    }
    Ok(ctx.expected_dividend * f64::from(ctx.periods + 1 - t) + ctx.terminal_value)
}

/// Probability of acting as a buyer in period `t`: `max(0.5 - φ t, 0)`.
pub fn nzi_buyer_prob(ctx: &MarketContext) -> f64 {
    (0.5 - ctx.phi * f64::from(ctx.t)).max(0.0)
}

/// Quote from an already drawn random component `u`, with the loose budget
/// cap applied to buyers.
pub fn anchored_quote(state: &TraderState, ctx: &MarketContext, u: f64) -> f64 {
    let a = (1.0 - ctx.alpha) * u + ctx.alpha * ctx.prev_mean_price;
    match state.role {
        Role::Buyer => a.min(state.balance),
        Role::Seller => a,
    }
}

fn loose_budget(state: &TraderState) -> Result<(), TraderError> {
    match state.role {
        Role::Seller if state.inventory == 0 => Err(TraderError::NoQuote("seller holds no units")),
        Role::Buyer if !(state.balance > 0.0) => Err(TraderError::NoQuote("buyer has no cash")),
        _ => Ok(()),
    }
}

/// Near-zero-intelligence quote: `u ~ U[0, k D_t]`, quote
/// `(1 - α) u + α P_{t-1}`, buyers capped at their balance.
pub fn nzi_quote<R: Rng + ?Sized>(
    state: &TraderState,
    ctx: &MarketContext,
    rng: &mut R,
) -> Result<f64, TraderError> {
    loose_budget(state)?;
    let upper = ctx.k * nzi_default_value(ctx)?;
    let u = uniform_real(upper, rng);
    Ok(anchored_quote(state, ctx, u))
}

/// Upper end of the opinionated uncertainty: `½ k D_t (1 + x)`.
pub fn onzi_uncertainty_bound(ctx: &MarketContext, x: f64) -> Result<f64, TraderError> {
    check_opinion(x)?;
    Ok(0.5 * ctx.k * nzi_default_value(ctx)? * (1.0 + x))
}

/// Opinionated NZI quote: the random component is drawn from the
/// opinionated uncertainty range instead of `[0, k D_t]`.
pub fn onzi_quote<R: Rng + ?Sized>(
    state: &TraderState,
    ctx: &MarketContext,
    opinion: &Opinion,
    rng: &mut R,
) -> Result<f64, TraderError> {
    let upper = onzi_uncertainty_bound(ctx, opinion.value)?;
    loose_budget(state)?;
    let ou = uniform_real(upper, rng);
    Ok(anchored_quote(state, ctx, ou))
}
