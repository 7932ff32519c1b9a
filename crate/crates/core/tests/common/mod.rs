//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nms_core::orderbook::{Order, Price, Side, Trade};

/// Rescan matcher: keeps every resting order in one arrival-ordered list and
/// scans the whole list for the best counterparty on each fill.
#[derive(Debug, Clone)]
pub struct NaiveBook {
    pub min: Price,
    pub max: Price,
    resting: Vec<(u64, Order)>,
    seen: Vec<u64>,
    seq: u64,
    pub tape: Vec<Trade>,
}

impl NaiveBook {
    pub fn new(min: Price, max: Price) -> Self {
        Self {
            min,
            max,
            resting: Vec::new(),
            seen: Vec::new(),
            seq: 0,
            tape: Vec::new(),
        }
    }

    /// Mirrors the engine's acceptance rules; `None` means rejected.
    pub fn submit(&mut self, order: Order) -> Option<Vec<Trade>> {
        if order.price < self.min || order.price > self.max || order.quantity == 0 {
            return None;
        }
        if self.seen.contains(&order.order_id) {
            return None;
        }
        self.seen.push(order.order_id);
        self.resting.retain(|(_, o)| o.trader_id != order.trader_id);

        let mut incoming = order;
        let mut fills = Vec::new();
        while incoming.quantity > 0 {
            let mut best: Option<usize> = None;
            for (k, (seq, o)) in self.resting.iter().enumerate() {
                if o.side == incoming.side {
                    continue;
                }
                let crosses = match incoming.side {
                    Side::Bid => incoming.price >= o.price,
                    Side::Ask => incoming.price <= o.price,
                };
                if !crosses {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => {
                        let (bseq, bo) = &self.resting[b];
                        let price_better = match incoming.side {
                            Side::Bid => o.price < bo.price,
                            Side::Ask => o.price > bo.price,
                        };
                        price_better || (o.price == bo.price && seq < bseq)
                    }
                };
                if better {
                    best = Some(k);
                }
            }
            let Some(k) = best else { break };
            let resting = &mut self.resting[k].1;
            let qty = resting.quantity.min(incoming.quantity);
            resting.quantity -= qty;
            incoming.quantity -= qty;
            let (buyer_id, seller_id) = match incoming.side {
                Side::Bid => (incoming.trader_id, resting.trader_id),
                Side::Ask => (resting.trader_id, incoming.trader_id),
            };
            let trade = Trade {
                time: incoming.time,
                price: resting.price,
                quantity: qty,
                buyer_id,
                seller_id,
            };
            if resting.quantity == 0 {
                self.resting.remove(k);
            }
            self.tape.push(trade);
            fills.push(trade);
        }
        if incoming.quantity > 0 {
            self.seq += 1;
            self.resting.push((self.seq, incoming));
        }
        Some(fills)
    }

    pub fn cancel(&mut self, trader_id: usize) {
        self.resting.retain(|(_, o)| o.trader_id != trader_id);
    }

    /// Resting orders of one side, best price first, oldest first within a level.
    pub fn side(&self, side: Side) -> Vec<Order> {
        let mut v: Vec<&(u64, Order)> = self.resting.iter().filter(|(_, o)| o.side == side).collect();
        v.sort_by(|(sa, a), (sb, b)| {
            let by_price = match side {
                Side::Bid => b.price.cmp(&a.price),
                Side::Ask => a.price.cmp(&b.price),
            };
            by_price.then(sa.cmp(sb))
        });
        v.into_iter().map(|(_, o)| o.clone()).collect()
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Large-sample critical value at significance 0.001.
pub fn ks_critical_001(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.949 * ((n + m) / (n * m)).sqrt()
}
