//! Limit order book for a single asset traded in a continuous double auction.
//!
//! Prices are integer ticks. Each trader holds at most one resting order;
//! submitting again replaces it. Incoming orders match best-first against
//! the opposite side and execute at the resting order's price.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Price = u32;
pub type TraderId = usize;
pub type OrderId = u64;
pub type Tick = u64;

pub const DEFAULT_PRICE_MIN: Price = 1;
pub const DEFAULT_PRICE_MAX: Price = 500;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderError {
    #[error("order {order_id} price {price} outside [{min}, {max}]")]
    PriceOutOfBounds {
        order_id: OrderId,
        price: Price,
        min: Price,
        max: Price,
    },
    #[error("order id {0} already used")]
    DuplicateOrderId(OrderId),
    #[error("order {0} has zero quantity")]
    ZeroQuantity(OrderId),
    #[error("price bounds [{0}, {1}] are empty")]
    InvalidBounds(Price, Price),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub order_id: OrderId,
    pub trader_id: TraderId,
    pub side: Side,
    pub price: Price,
    pub quantity: u32,
    pub time: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub time: Tick,
    pub price: Price,
    pub quantity: u32,
    pub buyer_id: TraderId,
    pub seller_id: TraderId,
}

/// Value copy of the top and bottom of the book.
///
/// `worst_bid` and `worst_ask` fall back to the system bounds when the
/// corresponding side is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookSnapshot {
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
    pub worst_bid: Price,
    pub worst_ask: Price,
    pub price_min: Price,
    pub price_max: Price,
}

impl BookSnapshot {
    /// Lowest price a buyer may quote: the worst bid on the book.
    pub fn min_quote(&self) -> Price {
        self.worst_bid
    }

    /// Highest price a seller may quote: the best ask, or the system maximum.
    pub fn max_quote(&self) -> Price {
        self.best_ask.unwrap_or(self.price_max)
    }
}

/// One side of the book keyed by price; FIFO queue per level.
#[derive(Debug, Clone, Default)]
struct HalfBook {
    levels: BTreeMap<Price, VecDeque<Order>>,
}

impl HalfBook {
    fn insert(&mut self, order: Order) {
        self.levels.entry(order.price).or_default().push_back(order);
    }

    fn remove(&mut self, price: Price, order_id: OrderId) -> Option<Order> {
        let level = self.levels.get_mut(&price)?;
        let pos = level.iter().position(|o| o.order_id == order_id)?;
        let order = level.remove(pos);
        if level.is_empty() {
            self.levels.remove(&price);
        }
        order
    }

    fn min_price(&self) -> Option<Price> {
        self.levels.keys().next().copied()
    }

    fn max_price(&self) -> Option<Price> {
        self.levels.keys().next_back().copied()
    }

    fn len(&self) -> usize {
        self.levels.values().map(VecDeque::len).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LimitOrderBook {
    bids: HalfBook,
    asks: HalfBook,
    /// trader -> (side, price, order id) of its resting order
    resting: HashMap<TraderId, (Side, Price, OrderId)>,
    used_ids: HashSet<OrderId>,
    tape: Vec<Trade>,
    price_min: Price,
    price_max: Price,
}

impl Default for LimitOrderBook {
    fn default() -> Self {
        Self::new(DEFAULT_PRICE_MIN, DEFAULT_PRICE_MAX).expect("default bounds are valid")
    }
}

impl LimitOrderBook {
    pub fn new(price_min: Price, price_max: Price) -> Result<Self, OrderError> {
        if price_min > price_max {
            return Err(OrderError::InvalidBounds(price_min, price_max));
        }
        Ok(Self {
            bids: HalfBook::default(),
            asks: HalfBook::default(),
            resting: HashMap::new(),
            used_ids: HashSet::new(),
            tape: Vec::new(),
            price_min,
            price_max,
        })
    }

    pub fn price_bounds(&self) -> (Price, Price) {
        (self.price_min, self.price_max)
    }

    pub fn tape(&self) -> &[Trade] {
        &self.tape
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.max_price()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.min_price()
    }

    pub fn snapshot(&self) -> BookSnapshot {
        BookSnapshot {
            best_bid: self.best_bid(),
            best_ask: self.best_ask(),
            worst_bid: self.bids.min_price().unwrap_or(self.price_min),
            worst_ask: self.asks.max_price().unwrap_or(self.price_max),
            price_min: self.price_min,
            price_max: self.price_max,
        }
    }

    /// Resting bids best-first: price descending, then arrival order.
    pub fn bids(&self) -> Vec<Order> {
        self.bids
            .levels
            .values()
            .rev()
            .flat_map(|level| level.iter().cloned())
            .collect()
    }

    /// Resting asks best-first: price ascending, then arrival order.
    pub fn asks(&self) -> Vec<Order> {
        self.asks
            .levels
            .values()
            .flat_map(|level| level.iter().cloned())
            .collect()
    }

    pub fn order_count(&self) -> usize {
        self.bids.len() + self.asks.len()
    }

    pub fn resting_order(&self, trader_id: TraderId) -> Option<(Side, Price, OrderId)> {
        self.resting.get(&trader_id).copied()
    }

    /// Removes the trader's resting order, if any.
    pub fn cancel(&mut self, trader_id: TraderId) -> Option<Order> {
        let (side, price, order_id) = self.resting.remove(&trader_id)?;
        match side {
            Side::Bid => self.bids.remove(price, order_id),
            Side::Ask => self.asks.remove(price, order_id),
        }
    }

    /// Submits an order, replacing the trader's previous quote, and returns
    /// the trades it caused. Any unfilled remainder rests on the book.
    pub fn submit(&mut self, order: Order) -> Result<Vec<Trade>, OrderError> {
        if order.price < self.price_min || order.price > self.price_max {
            return Err(OrderError::PriceOutOfBounds {
                order_id: order.order_id,
                price: order.price,
                min: self.price_min,
                max: self.price_max,
            });
        }
        if order.quantity == 0 {
            return Err(OrderError::ZeroQuantity(order.order_id));
        }
        if !self.used_ids.insert(order.order_id) {
            return Err(OrderError::DuplicateOrderId(order.order_id));
        }
        self.cancel(order.trader_id);

        let mut incoming = order;
        let mut fills = Vec::new();
        while incoming.quantity > 0 {
            let best = match incoming.side {
                Side::Bid => self.best_ask().filter(|&ask| incoming.price >= ask),
                Side::Ask => self.best_bid().filter(|&bid| incoming.price <= bid),
            };
            let Some(level_price) = best else { break };
            let book = match incoming.side {
                Side::Bid => &mut self.asks,
                Side::Ask => &mut self.bids,
            };
            let level = book
                .levels
                .get_mut(&level_price)
                .expect("best price level exists");
            let resting = level.front_mut().expect("levels are never empty");
            let qty = resting.quantity.min(incoming.quantity);
            resting.quantity -= qty;
            incoming.quantity -= qty;
            let (buyer_id, seller_id) = match incoming.side {
                Side::Bid => (incoming.trader_id, resting.trader_id),
                Side::Ask => (resting.trader_id, incoming.trader_id),
            };
            if resting.quantity == 0 {
                let done = level.pop_front().expect("front exists");
                self.resting.remove(&done.trader_id);
                if level.is_empty() {
                    book.levels.remove(&level_price);
                }
            }
            let trade = Trade {
                time: incoming.time,
                price: level_price,
                quantity: qty,
                buyer_id,
                seller_id,
            };
            self.tape.push(trade);
            fills.push(trade);
        }

        if incoming.quantity > 0 {
            self.resting.insert(
                incoming.trader_id,
                (incoming.side, incoming.price, incoming.order_id),
            );
            match incoming.side {
                Side::Bid => self.bids.insert(incoming),
                Side::Ask => self.asks.insert(incoming),
            }
        }
        Ok(fills)
    }

    /// Empties both sides, keeping the tape.
    pub fn clear_orders(&mut self) {
        self.bids = HalfBook::default();
        self.asks = HalfBook::default();
        self.resting.clear();
    }
}
