//! Transitions and the dual replay store: intervened and autonomous
//! transitions live in separate FIFOs and are sampled in equal numbers.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::Action;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Arc<[f64]>,
    pub a_n: Action,
    pub a_h: Option<Action>,
    pub intervened: bool,
    pub s_next: Arc<[f64]>,
    pub done: bool,
    /// Kept for reward-based baselines and logging; the proxy-value learner
    /// never reads it.
    pub reward: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransitionError {
    #[error("intervened transition without a human action")]
    MissingHumanAction,
    #[error("autonomous transition carries a human action")]
    UnexpectedHumanAction,
    #[error("action outside [-1, 1]")]
    ActionOutOfRange,
}

fn in_box(a: &Action) -> bool {
    a.iter().all(|v| (-1.0..=1.0).contains(v))
}

impl Transition {
    /// The action that was actually executed.
    pub fn executed(&self) -> Action {
        match (self.intervened, self.a_h) {
            (true, Some(a)) => a,
            _ => self.a_n,
        }
    }

    pub fn validate(&self) -> Result<(), TransitionError> {
        match (self.intervened, &self.a_h) {
            (true, None) => return Err(TransitionError::MissingHumanAction),
            (false, Some(_)) => return Err(TransitionError::UnexpectedHumanAction),
            _ => {}
        }
        if !in_box(&self.a_n) || !self.a_h.as_ref().is_none_or(in_box) {
            return Err(TransitionError::ActionOutOfRange);
        }
        Ok(())
    }
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fifo {
    capacity: usize,
    items: VecDeque<Transition>,
    inserted: u64,
}

impl Fifo {
    pub fn new(capacity: usize) -> Self {
        Fifo {
            capacity: capacity.max(1),
            items: VecDeque::new(),
            inserted: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total transitions ever pushed, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// `n` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBuffer {
    pub human: Fifo,
    pub novice: Fifo,
}

impl DualBuffer {
    pub fn new(capacity: usize) -> Self {
        DualBuffer {
            human: Fifo::new(capacity),
            novice: Fifo::new(capacity),
        }
    }

    /// Routes to the human store iff the transition was intervened.
    pub fn store(&mut self, t: Transition) -> Result<(), TransitionError> {
        t.validate()?;
        if t.intervened {
            self.human.push(t);
        } else {
            self.novice.push(t);
        }
        Ok(())
    }

    pub fn ready(&self, warmup: usize) -> bool {
        self.human.len() >= warmup.max(1) && self.novice.len() >= warmup.max(1)
    }

    /// `n` draws from each store, or `None` while either is below warmup.
    pub fn sample_balanced<R: Rng + ?Sized>(
        &self,
        n: usize,
        warmup: usize,
        rng: &mut R,
    ) -> Option<(Vec<&Transition>, Vec<&Transition>)> {
        if !self.ready(warmup) {
            return None;
        }
        let h = self.human.sample(n, rng);
        let m = self.novice.sample(n, rng);
        Some((h, m))
    }
}
