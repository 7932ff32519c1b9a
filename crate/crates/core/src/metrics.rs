//! Post-run analytics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orderbook::Price;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("realized surplus {realized} with zero attainable surplus")]
    Inconsistent { realized: f64 },
    #[error("need at least 2 periods with trades, got {0}")]
    InsufficientData(usize),
}

/// A trade tagged with the limit prices of the two customer orders it filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitedTrade {
    pub price: Price,
    pub buyer_limit: Price,
    pub seller_limit: Price,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub realized_surplus: f64,
    pub max_surplus: f64,
    /// Percentage of `max_surplus` realised.
    pub efficiency: f64,
}

/// Competitive-equilibrium surplus: best buyers paired with cheapest sellers
/// for as long as the pair is profitable.
pub fn max_surplus(buyer_limits: &[Price], seller_limits: &[Price]) -> f64 {
    let mut buyers = buyer_limits.to_vec();
    let mut sellers = seller_limits.to_vec();
    buyers.sort_unstable_by(|a, b| b.cmp(a));
    sellers.sort_unstable();
    buyers
        .iter()
        .zip(&sellers)
        .take_while(|(b, s)| b >= s)
        .map(|(&b, &s)| f64::from(b) - f64::from(s))
        .sum()
}

pub fn allocative_efficiency(
    trades: &[LimitedTrade],
    buyer_limits: &[Price],
    seller_limits: &[Price],
) -> Result<EfficiencyReport, MetricsError> {
    let realized: f64 = trades
        .iter()
        .map(|t| {
            let price = f64::from(t.price);
            (f64::from(t.buyer_limit) - price) + (price - f64::from(t.seller_limit))
        })
        .sum();
    let max = max_surplus(buyer_limits, seller_limits);
    let efficiency = if max > 0.0 {
        100.0 * realized / max
    } else if realized > 0.0 {
        return Err(MetricsError::Inconsistent { realized });
    } else {
        0.0
    };
    Ok(EfficiencyReport {
        realized_surplus: realized,
        max_surplus: max,
        efficiency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePathFeatures {
    /// 1-based period of the highest mean price (first one on ties).
    pub peak_period: usize,
    pub peak_value: f64,
    /// Per-period slope between the first two periods that traded.
    pub initial_gradient: f64,
    /// Mean price of the last period that traded.
    pub terminal_mean: f64,
}

pub fn price_path_features(period_means: &[Option<f64>]) -> Result<PricePathFeatures, MetricsError> {
    let traded: Vec<(usize, f64)> = period_means
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|v| (i + 1, v)))
        .collect();
    if traded.len() < 2 {
        return Err(MetricsError::InsufficientData(traded.len()));
    }
    let (peak_period, peak_value) = traded
        .iter()
        .copied()
        .fold(traded[0], |best, cur| if cur.1 > best.1 { cur } else { best });
    let (p0, m0) = traded[0];
    let (p1, m1) = traded[1];
    Ok(PricePathFeatures {
        peak_period,
        peak_value,
        initial_gradient: (m1 - m0) / (p1 - p0) as f64,
        terminal_mean: traded[traded.len() - 1].1,
    })
}
