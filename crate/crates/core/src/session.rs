//! Experiment orchestration.
//!
//! A run is a sequence of one-second ticks grouped into trading periods.
//! Every tick a randomly chosen trader requotes, then the opinion model
//! advances. Period ends update the anchoring price, pay dividends and
//! clear the book.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::metrics::{self, EfficiencyReport, LimitedTrade, PricePathFeatures};
use crate::opinion::{
    classify_convergence, draw_pair, Convergence, OdModel, OdParams, OpinionPopulation,
};
use crate::orderbook::{LimitOrderBook, Order, Price, Side, Tick, TraderId, DEFAULT_PRICE_MAX, DEFAULT_PRICE_MIN};
use crate::traders::{
    self, default_value_at, nzi_buyer_prob, round_to_tick, MarketContext, Role, Strategy,
    TraderError, TraderState,
};

/// Market constants and trading-schedule parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    pub periods: u32,
    pub period_seconds: u32,
    /// Dividend support; one value is drawn uniformly per period.
    pub dividends: Vec<f64>,
    /// Default value after the last period.
    pub terminal_value: f64,
    pub k: f64,
    pub alpha: f64,
    pub phi: f64,
    /// Redraw NZI/ONZI roles each period with the declining buyer probability.
    pub role_switching: bool,
    pub price_min: Price,
    pub price_max: Price,
    pub buyer_limits: [Price; 2],
    pub seller_limits: [Price; 2],
    /// Initial units held by each NZI/ONZI trader.
    pub initial_units: u32,
    /// Wealth constant `cash + D_1 * units` shared by every NZI/ONZI trader.
    pub endowment: f64,
    /// Defaults to paying dividends only in NZI/ONZI markets.
    pub pay_dividends: Option<bool>,
    pub clear_book_each_period: bool,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            periods: 10,
            period_seconds: 240,
            dividends: vec![0.0, 1.0, 2.0, 3.0],
            terminal_value: 40.0,
            k: 4.0846,
            alpha: 0.848,
            phi: 0.0,
            role_switching: false,
            price_min: DEFAULT_PRICE_MIN,
            price_max: DEFAULT_PRICE_MAX,
            buyer_limits: [50, 150],
            seller_limits: [50, 150],
            initial_units: 10,
            endowment: 1000.0,
            pay_dividends: None,
            clear_book_each_period: true,
        }
    }
}

impl MarketConfig {
    pub fn expected_dividend(&self) -> f64 {
        self.dividends.iter().sum::<f64>() / self.dividends.len() as f64
    }

    pub fn total_ticks(&self) -> u64 {
        u64::from(self.periods) * u64::from(self.period_seconds)
    }

    pub fn context(&self) -> MarketContext {
        MarketContext {
            t: 1,
            periods: self.periods,
            expected_dividend: self.expected_dividend(),
            terminal_value: self.terminal_value,
            prev_mean_price: 0.0,
            k: self.k,
            alpha: self.alpha,
            phi: self.phi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    /// Opinion interactions per tick (ordered pairs; BC steps once per tick
    /// when this is non-zero).
    pub interactions_per_tick: u32,
    pub quotes_per_tick: u32,
    /// Ticks at which every extremist's opinion is negated.
    pub shift_ticks: Vec<u64>,
    /// Adds a shift at half the run length.
    pub shift_midpoint: bool,
    pub opinion_sample_every: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            interactions_per_tick: 1,
            quotes_per_tick: 1,
            shift_ticks: Vec::new(),
            shift_midpoint: false,
            opinion_sample_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    #[serde(default = "default_traders")]
    pub n_buyers: usize,
    #[serde(default = "default_traders")]
    pub n_sellers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub od: OdParams,
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub session: SessionConfig,
}

fn default_traders() -> usize {
    100
}

fn default_replications() -> u32 {
    1
}

impl ExperimentConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            n_buyers: default_traders(),
            n_sellers: default_traders(),
            seed: 0,
            replications: 1,
            od: OdParams::default(),
            market: MarketConfig::default(),
            session: SessionConfig::default(),
        }
    }

    pub fn n_traders(&self) -> usize {
        self.n_buyers + self.n_sellers
    }

    pub fn pays_dividends(&self) -> bool {
        self.market
            .pay_dividends
            .unwrap_or(!self.strategy.uses_limit_prices())
    }

    /// Sorted, de-duplicated shift ticks including the midpoint if requested.
    pub fn shift_schedule(&self) -> BTreeSet<u64> {
        let mut ticks: BTreeSet<u64> = self.session.shift_ticks.iter().copied().collect();
        if self.session.shift_midpoint {
            ticks.insert(self.market.total_ticks() / 2);
        }
        ticks
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &str, msg: String| Err(ConfigError::OutOfRange { key: key.to_string(), message: msg });
        if self.n_buyers < 1 {
            return range("n_buyers", "must be at least 1".into());
        }
        if self.n_sellers < 1 {
            return range("n_sellers", "must be at least 1".into());
        }
        if self.replications < 1 {
            return range("replications", "must be at least 1".into());
        }
        self.od.validate().map_err(|e| ConfigError::OutOfRange {
            key: "od".into(),
            message: e.to_string(),
        })?;
        let m = &self.market;
        if m.periods < 1 {
            return range("market.periods", format!("{} must be >= 1", m.periods));
        }
        if m.period_seconds < 1 {
            return range("market.period_seconds", format!("{} must be > 0", m.period_seconds));
        }
        if m.dividends.is_empty() || m.dividends.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return range("market.dividends", "needs at least one finite value >= 0".into());
        }
        if !(m.k > 0.0 && m.k.is_finite()) {
            return range("market.k", format!("{} must be > 0", m.k));
        }
        if !(m.alpha > 0.0 && m.alpha < 1.0) {
            return range("market.alpha", format!("{} outside (0, 1)", m.alpha));
        }
        let phi_max = 0.5 / f64::from(m.periods);
        if !(m.phi >= 0.0 && m.phi < phi_max) {
            return range("market.phi", format!("{} outside [0, {phi_max})", m.phi));
        }
        if !(m.terminal_value >= 0.0 && m.terminal_value.is_finite()) {
            return range("market.terminal_value", format!("{} must be >= 0", m.terminal_value));
        }
        if m.price_min > m.price_max {
            return range(
                "market.price_min",
                format!("[{}, {}] is empty", m.price_min, m.price_max),
            );
        }
        for (key, [lo, hi]) in [("market.buyer_limits", m.buyer_limits), ("market.seller_limits", m.seller_limits)] {
            if lo > hi || lo < m.price_min || hi > m.price_max {
                return range(
                    key,
                    format!("[{lo}, {hi}] must be ordered and within [{}, {}]", m.price_min, m.price_max),
                );
            }
        }
        if !m.endowment.is_finite() {
            return range("market.endowment", "must be finite".into());
        }
        let d1 = default_value_at(&m.context(), 1).unwrap_or(0.0);
        if !self.strategy.uses_limit_prices() && m.endowment < d1 * f64::from(m.initial_units) {
            return range(
                "market.endowment",
                format!(
                    "{} leaves negative cash for {} units at default value {d1}",
                    m.endowment, m.initial_units
                ),
            );
        }
        let s = &self.session;
        if s.quotes_per_tick < 1 {
            return range("session.quotes_per_tick", "must be at least 1".into());
        }
        if s.opinion_sample_every < 1 {
            return range("session.opinion_sample_every", "must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapeRow {
    pub tick: Tick,
    pub period: u32,
    pub price: Price,
    pub quantity: u32,
    pub buyer_id: TraderId,
    pub seller_id: TraderId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpinionSample {
    pub tick: Tick,
    pub agent_id: usize,
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub period: u32,
    pub mean_price: Option<f64>,
    pub trade_count: usize,
    pub default_value: f64,
    pub half_k_default_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    /// Absent when the population had no initially moderate agents.
    pub y_metric: Option<f64>,
    pub convergence: Option<Convergence>,
    /// ZIC/OZIC runs only.
    pub efficiency: Option<EfficiencyReport>,
    /// NZI/ONZI runs with at least two trading periods.
    pub price_path: Option<PricePathFeatures>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub seed: u64,
    pub tape: Vec<TapeRow>,
    pub opinion_series: Vec<OpinionSample>,
    pub period_summaries: Vec<PeriodSummary>,
    pub final_metrics: FinalMetrics,
    /// Dividend paid per unit at the end of each period (empty when off).
    pub dividend_draws: Vec<f64>,
    pub initial_traders: Vec<TraderState>,
    pub final_traders: Vec<TraderState>,
}

impl RunOutput {
    pub fn period_means(&self) -> Vec<Option<f64>> {
        self.period_summaries.iter().map(|p| p.mean_price).collect()
    }

    /// Mean trade price over every trade in the run.
    pub fn mean_trade_price(&self) -> Option<f64> {
        mean(self.tape.iter().map(|t| f64::from(t.price)))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Arithmetic mean trade price per period; `period_bounds[p]` is the
/// half-open tick range `[start, end)` of period `p`.
pub fn mean_price_per_period(tape: &[TapeRow], period_bounds: &[(Tick, Tick)]) -> Vec<Option<f64>> {
    period_bounds
        .iter()
        .map(|&(start, end)| {
            let lo = tape.partition_point(|t| t.tick < start);
            let hi = tape.partition_point(|t| t.tick < end);
            mean(tape[lo..hi].iter().map(|t| f64::from(t.price)))
        })
        .collect()
}

pub fn period_bounds(market: &MarketConfig) -> Vec<(Tick, Tick)> {
    let len = u64::from(market.period_seconds);
    (0..u64::from(market.periods))
        .map(|p| (p * len, (p + 1) * len))
        .collect()
}

const STREAM_SCHEDULE: u64 = 0;
const STREAM_OPINION: u64 = 1;
const STREAM_DIVIDEND: u64 = 2;
const STREAM_TRADER_BASE: u64 = 16;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

struct Simulation<'a> {
    cfg: &'a ExperimentConfig,
    book: LimitOrderBook,
    traders: Vec<TraderState>,
    trader_rngs: Vec<ChaCha8Rng>,
    schedule_rng: ChaCha8Rng,
    opinion_rng: ChaCha8Rng,
    dividend_rng: ChaCha8Rng,
    opinions: OpinionPopulation,
    ctx: MarketContext,
    next_order_id: u64,
    tape: Vec<TapeRow>,
    limited_trades: Vec<LimitedTrade>,
    issued_buyer_limits: Vec<Price>,
    issued_seller_limits: Vec<Price>,
    opinion_series: Vec<OpinionSample>,
    dividend_draws: Vec<f64>,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        let m = &cfg.market;
        let seed = cfg.seed;
        let n = cfg.n_traders();
        let mut opinion_rng = stream(seed, STREAM_OPINION);
        let opinions = OpinionPopulation::init(n, &cfg.od, &mut opinion_rng)
            .expect("validated config yields a valid population");
        let ctx = m.context();
        let d1 = default_value_at(&ctx, 1).expect("period 1 is valid");

        let mut sim = Self {
            cfg,
            book: LimitOrderBook::new(m.price_min, m.price_max).expect("validated bounds"),
            traders: Vec::with_capacity(n),
            trader_rngs: (0..n as u64).map(|i| stream(seed, STREAM_TRADER_BASE + i)).collect(),
            schedule_rng: stream(seed, STREAM_SCHEDULE),
            opinion_rng,
            dividend_rng: stream(seed, STREAM_DIVIDEND),
            opinions,
            ctx,
            next_order_id: 0,
            tape: Vec::new(),
            limited_trades: Vec::new(),
            issued_buyer_limits: Vec::new(),
            issued_seller_limits: Vec::new(),
            opinion_series: Vec::new(),
            dividend_draws: Vec::new(),
        };

        for id in 0..n {
            let role = if id < cfg.n_buyers { Role::Buyer } else { Role::Seller };
            let mut state = TraderState::new(id, cfg.strategy, role);
            state.opinion_index = Some(id);
            if cfg.strategy.uses_limit_prices() {
                sim.traders.push(state);
                sim.assign_limit(id);
            } else {
                state.inventory = m.initial_units;
                state.balance = m.endowment - d1 * f64::from(m.initial_units);
                sim.traders.push(state);
            }
        }
        sim
    }

    fn assign_limit(&mut self, id: TraderId) {
        let m = &self.cfg.market;
        let rng = &mut self.trader_rngs[id];
        let trader = &mut self.traders[id];
        let [lo, hi] = match trader.role {
            Role::Buyer => m.buyer_limits,
            Role::Seller => m.seller_limits,
        };
        let limit = rng.gen_range(lo..=hi);
        trader.limit_price = Some(limit);
        match trader.role {
            Role::Buyer => self.issued_buyer_limits.push(limit),
            Role::Seller => self.issued_seller_limits.push(limit),
        }
    }

    fn quote(&mut self, id: TraderId) -> Result<Price, TraderError> {
        let trader = &self.traders[id];
        let rng = &mut self.trader_rngs[id];
        let opinion = self.opinions.agents()[trader.opinion_index.unwrap_or(id)];
        let snap = self.book.snapshot();
        let raw = match trader.strategy {
            Strategy::Zic => f64::from(traders::zic_quote(trader, &snap, rng)?),
            Strategy::Ozic => f64::from(traders::ozic_quote(trader, &snap, &opinion, rng)?),
            Strategy::Nzi => traders::nzi_quote(trader, &self.ctx, rng)?,
            Strategy::Onzi => traders::onzi_quote(trader, &self.ctx, &opinion, rng)?,
        };
        let (lo, hi) = self.book.price_bounds();
        Ok(round_to_tick(raw).clamp(lo, hi))
    }

    fn trading_step(&mut self, tick: Tick, period: u32) {
        let n = self.traders.len();
        let id = self.schedule_rng.gen_range(0..n);
        let price = match self.quote(id) {
            Ok(p) => p,
            Err(TraderError::NoQuote(_)) => return,
            Err(e) => panic!("trader {id} failed to quote: {e}"),
        };
        let trader = &self.traders[id];
        // Cash-constrained buyers must not overpay after tick rounding.
        let price = if trader.strategy.uses_limit_prices() || trader.role == Role::Seller {
            price
        } else {
            let affordable = trader.balance.floor().max(0.0) as Price;
            if affordable < self.book.price_bounds().0 {
                return;
            }
            price.min(affordable)
        };
        let side = match trader.role {
            Role::Buyer => Side::Bid,
            Role::Seller => Side::Ask,
        };
        let order = Order {
            order_id: self.next_order_id,
            trader_id: id,
            side,
            price,
            quantity: 1,
            time: tick,
        };
        self.next_order_id += 1;
        let fills = self.book.submit(order).expect("session orders are valid");
        for fill in fills {
            self.settle(fill.buyer_id, fill.seller_id, fill.price, fill.quantity);
            self.tape.push(TapeRow {
                tick,
                period,
                price: fill.price,
                quantity: fill.quantity,
                buyer_id: fill.buyer_id,
                seller_id: fill.seller_id,
            });
        }
    }

    fn settle(&mut self, buyer: TraderId, seller: TraderId, price: Price, qty: u32) {
        let p = f64::from(price);
        if self.cfg.strategy.uses_limit_prices() {
            let bl = self.traders[buyer].limit_price.expect("ZIC traders carry limits");
            let sl = self.traders[seller].limit_price.expect("ZIC traders carry limits");
            self.limited_trades.push(LimitedTrade {
                price,
                buyer_limit: bl,
                seller_limit: sl,
            });
            self.traders[buyer].balance += f64::from(bl) - p;
            self.traders[seller].balance += p - f64::from(sl);
            self.assign_limit(buyer);
            self.assign_limit(seller);
        } else {
            let cash = p * f64::from(qty);
            self.traders[buyer].balance -= cash;
            self.traders[buyer].inventory += qty;
            self.traders[seller].balance += cash;
            self.traders[seller].inventory -= qty;
        }
    }

    fn opinion_step(&mut self) {
        let per_tick = self.cfg.session.interactions_per_tick;
        if per_tick == 0 {
            return;
        }
        let od = &self.cfg.od;
        if od.model == OdModel::Bc {
            self.opinions.bc_step(od).expect("BC params");
            return;
        }
        let n = self.opinions.len();
        for _ in 0..per_tick {
            let (i, j) = draw_pair(n, &mut self.opinion_rng);
            self.opinions
                .interact(i, j, od, &mut self.opinion_rng)
                .expect("pair drawn in range");
        }
    }

    fn sample_opinions(&mut self, tick: Tick) {
        self.opinion_series
            .extend(self.opinions.agents().iter().enumerate().map(|(agent_id, o)| OpinionSample {
                tick,
                agent_id,
                value: o.value,
                uncertainty: o.uncertainty,
            }));
    }

    fn close_period(&mut self, period_start: usize) {
        let period_mean = mean(self.tape[period_start..].iter().map(|t| f64::from(t.price)));
        if let Some(p) = period_mean {
            self.ctx.prev_mean_price = p;
        }
        if self.cfg.pays_dividends() {
            let divs = &self.cfg.market.dividends;
            let d = divs[self.dividend_rng.gen_range(0..divs.len())];
            for trader in &mut self.traders {
                trader.balance += d * f64::from(trader.inventory);
            }
            self.dividend_draws.push(d);
        }
        if self.cfg.market.clear_book_each_period {
            self.book.clear_orders();
        }
        self.ctx.t += 1;
    }

    fn assign_roles(&mut self) {
        if !self.cfg.market.role_switching || self.cfg.strategy.uses_limit_prices() {
            return;
        }
        let pi = nzi_buyer_prob(&self.ctx);
        for (trader, rng) in self.traders.iter_mut().zip(&mut self.trader_rngs) {
            trader.role = if rng.gen_bool(pi) { Role::Buyer } else { Role::Seller };
        }
    }

    fn run(mut self) -> RunOutput {
        let cfg = self.cfg;
        let m = &cfg.market;
        let total = m.total_ticks();
        let period_len = u64::from(m.period_seconds);
        let shifts = cfg.shift_schedule();
        let sample_every = cfg.session.opinion_sample_every;
        let initial_traders = self.traders.clone();

        let mut period_start = 0usize;
        self.assign_roles();
        for tick in 0..total {
            let period = (tick / period_len) as u32 + 1;
            if shifts.contains(&tick) {
                self.opinions.shift_extremists();
            }
            if tick % sample_every == 0 {
                self.sample_opinions(tick);
            }
            for _ in 0..cfg.session.quotes_per_tick {
                self.trading_step(tick, period);
            }
            self.opinion_step();
            if (tick + 1) % period_len == 0 {
                self.close_period(period_start);
                period_start = self.tape.len();
                if tick + 1 < total {
                    self.assign_roles();
                }
            }
        }
        self.sample_opinions(total);

        let means = mean_price_per_period(&self.tape, &period_bounds(m));
        let ctx = m.context();
        let period_summaries = means
            .iter()
            .enumerate()
            .map(|(i, &mean_price)| {
                let period = i as u32 + 1;
                let dv = default_value_at(&ctx, period).expect("period in range");
                PeriodSummary {
                    period,
                    mean_price,
                    trade_count: self.tape.iter().filter(|t| t.period == period).count(),
                    default_value: dv,
                    half_k_default_value: 0.5 * m.k * dv,
                }
            })
            .collect();

        let y_metric = self.opinions.y_metric().ok();
        let efficiency = cfg.strategy.uses_limit_prices().then(|| {
            metrics::allocative_efficiency(
                &self.limited_trades,
                &self.issued_buyer_limits,
                &self.issued_seller_limits,
            )
            .expect("no-loss trades never exceed the attainable surplus")
        });
        let price_path = if cfg.strategy.uses_limit_prices() {
            None
        } else {
            metrics::price_path_features(&means).ok()
        };

        RunOutput {
            seed: cfg.seed,
            tape: self.tape,
            opinion_series: self.opinion_series,
            period_summaries,
            final_metrics: FinalMetrics {
                y_metric,
                convergence: y_metric.map(classify_convergence),
                efficiency,
                price_path,
            },
            dividend_draws: self.dividend_draws,
            initial_traders,
            final_traders: self.traders,
        }
    }
}

/// Runs a single replication with `cfg.seed`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, ConfigError> {
    cfg.validate()?;
    Ok(Simulation::new(cfg).run())
}

/// Runs every replication, replication `r` using seed `cfg.seed + r`.
/// Replications run in parallel; results are ordered by replication index.
pub fn run_replications(cfg: &ExperimentConfig) -> Result<Vec<RunOutput>, ConfigError> {
    cfg.validate()?;
    Ok((0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rep = cfg.clone();
            rep.seed = cfg.seed.wrapping_add(u64::from(r));
            Simulation::new(&rep).run()
        })
        .collect())
}
