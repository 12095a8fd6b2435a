//! In-process stand-in for the master/slave communication link.
//!
//! Messages are stamped with their send time and a delivery time
//! `sent_at + max(0, base_delay + jitter)`, or dropped outright. The receiver
//! always acts on the newest (by send time) message delivered so far.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack on the delivery comparison so `k·dt + delay` lands on tick `k + delay/dt`.
const CLOCK_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("send time {t} precedes previous send time {prev}")]
    ClockWentBackwards { t: f64, prev: f64 },
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub base_delay: f64,
    pub jitter_std: f64,
    pub loss_prob: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { base_delay: 0.0, jitter_std: 0.0, loss_prob: 0.0, seed: 0 }
    }
}

impl ChannelConfig {
    pub fn with_delay(base_delay: f64) -> Self {
        Self { base_delay, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.base_delay >= 0.0 && self.base_delay.is_finite()) {
            return Err(ChannelError::InvalidConfig(format!("base_delay = {}", self.base_delay)));
        }
        if !(self.jitter_std >= 0.0 && self.jitter_std.is_finite()) {
            return Err(ChannelError::InvalidConfig(format!("jitter_std = {}", self.jitter_std)));
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            return Err(ChannelError::InvalidConfig(format!("loss_prob = {} not in [0, 1)", self.loss_prob)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StampedMessage<T> {
    pub payload: T,
    pub sent_at: f64,
    pub deliver_at: f64,
}

#[derive(Clone, Debug)]
pub struct Channel<T> {
    config: ChannelConfig,
    rng: ChaCha8Rng,
    jitter: Option<Normal<f64>>,
    in_flight: Vec<StampedMessage<T>>,
    last_send: Option<f64>,
    last_returned: Option<StampedMessage<T>>,
    hold_last: bool,
}

impl<T: Clone> Channel<T> {
    pub fn new(config: ChannelConfig) -> Result<Self, ChannelError> {
        config.validate()?;
        let jitter = (config.jitter_std > 0.0).then(|| Normal::new(0.0, config.jitter_std).unwrap());
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            jitter,
            in_flight: Vec::new(),
            last_send: None,
            last_returned: None,
            hold_last: false,
        })
    }

    /// Keep returning the most recent payload when nothing newer has arrived.
    pub fn with_hold_last(mut self, hold: bool) -> Self {
        self.hold_last = hold;
        self
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn send(&mut self, payload: T, t: f64) -> Result<(), ChannelError> {
        if let Some(prev) = self.last_send {
            if t < prev {
                return Err(ChannelError::ClockWentBackwards { t, prev });
            }
        }
        self.last_send = Some(t);
        // Draws happen in a fixed order so the drop/jitter pattern depends on the seed only.
        let dropped = self.config.loss_prob > 0.0 && self.rng.random::<f64>() < self.config.loss_prob;
        let jitter = self.jitter.map_or(0.0, |n| n.sample(&mut self.rng));
        if dropped {
            return Ok(());
        }
        let delay = (self.config.base_delay + jitter).max(0.0);
        self.in_flight.push(StampedMessage { payload, sent_at: t, deliver_at: t + delay });
        Ok(())
    }

    /// Newest delivered message at time `t`, or `None`.
    ///
    /// Everything delivered by `t` is consumed; messages older than one
    /// already returned are discarded on arrival.
    pub fn recv_latest(&mut self, t: f64) -> Option<StampedMessage<T>> {
        let mut newest: Option<StampedMessage<T>> = None;
        let floor = self.last_returned.as_ref().map(|m| m.sent_at);
        self.in_flight.retain(|m| {
            if m.deliver_at > t + CLOCK_EPS {
                return true;
            }
            let fresh = floor.is_none_or(|f| m.sent_at > f);
            if fresh && newest.as_ref().is_none_or(|n| m.sent_at >= n.sent_at) {
                newest = Some(m.clone());
            }
            false
        });
        match newest {
            Some(m) => {
                self.last_returned = Some(m.clone());
                Some(m)
            }
            None if self.hold_last => self.last_returned.clone(),
            None => None,
        }
    }
}
