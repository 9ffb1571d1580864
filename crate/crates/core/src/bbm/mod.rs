//! Monte Carlo simulation of branching Brownian motion killed at a barrier.
//!
//! One ancestor starts at `start_x > 0` and the barrier sits at the origin.
//! Each particle diffuses as a standard Brownian motion for an
//! `Exponential(lambda)` lifetime and is then replaced by `n` copies with
//! probability `a_n` (`n = 0` is plain death). Starting at `x` with the
//! barrier at `0` is the mirror image of starting at `0` and asking whether
//! anybody reaches `x`.
//!
//! Replicates are scheduled by a global event queue: a particle's whole path
//! is sampled at birth, and its terminal event (death, barrier hit) is
//! processed in time order. The first hit popped from the queue is therefore
//! the earliest hit of the whole population.

mod estimate;
mod path;
mod rng;
mod stopped;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::offspring::OffspringPolynomial;

pub use estimate::{
    estimate_p, estimate_q, estimate_r, estimate_s, run_replicates, EstimateWithCI, PBounds,
    ReplicateSet, TagCounts, CAP_POLLUTION_THRESHOLD,
};
pub use path::{simulate_life, LifeEnd};
pub use rng::{mix_seed, replicate_rng, ReplicateRng};
pub use stopped::{simulate_stopped, StoppedOutcome};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_MAX_PARTICLES: usize = 1_000_000;
pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BbmError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("query time {t} lies beyond the simulation horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("this estimate needs a finite horizon")]
    UnboundedHorizon,
}

/// The model shared by the simulation, PDE and ODE routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Branching rate (1/time).
    pub lambda: f64,
    pub offspring: OffspringPolynomial,
    /// Distance of the ancestor from the barrier.
    pub start_x: f64,
}

impl ModelSpec {
    pub fn new(
        lambda: f64,
        offspring: OffspringPolynomial,
        start_x: f64,
    ) -> Result<Self, BbmError> {
        let m = Self {
            lambda,
            offspring,
            start_x,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), BbmError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(BbmError::InvalidModel(format!(
                "lambda = {} must be > 0",
                self.lambda
            )));
        }
        if !(self.start_x > 0.0 && self.start_x.is_finite()) {
            return Err(BbmError::InvalidModel(format!(
                "start_x = {} must be > 0",
                self.start_x
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelSpec,
    /// Path discretization step.
    pub dt: f64,
    /// `None` runs every replicate until it hits or dies out.
    pub horizon: Option<f64>,
    pub max_particles: usize,
    /// Cap on branching events (deaths) per replicate.
    pub max_events: u64,
    pub seed: u64,
    /// Apply the Brownian-bridge crossing probability between grid points.
    pub bridge_correction: bool,
    /// Worker threads; `None` uses the ambient pool. Does not affect results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(model: ModelSpec) -> Self {
        Self {
            model,
            dt: DEFAULT_DT,
            horizon: None,
            max_particles: DEFAULT_MAX_PARTICLES,
            max_events: DEFAULT_MAX_EVENTS,
            seed: 0,
            bridge_correction: true,
            threads: None,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_start(mut self, start_x: f64) -> Self {
        self.model.start_x = start_x;
        self
    }

    pub fn validate(&self) -> Result<(), BbmError> {
        self.model.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(BbmError::InvalidConfig(format!(
                "dt = {} must be > 0",
                self.dt
            )));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) || h.is_nan() {
                return Err(BbmError::InvalidConfig(format!(
                    "horizon = {h} must be > 0"
                )));
            }
        }
        if self.max_particles < 1 || self.max_events < 1 {
            return Err(BbmError::InvalidConfig("caps must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(BbmError::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeTag {
    HitBarrier,
    ExtinctNoHit,
    AliveAtHorizonNoHit,
    CapExceeded,
}

/// Terminal state of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub tag: OutcomeTag,
    /// Hit time, extinction time, the horizon, or the time a cap tripped.
    pub elapsed: f64,
    pub peak_population: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum EventKind {
    Hit,
    Death { pos: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Event queue plus the bookkeeping shared by the plain and stopped processes.
pub(crate) struct Population<'a> {
    config: &'a SimConfig,
    lifetime: Exp<f64>,
    pub queue: BinaryHeap<Event>,
    seq: u64,
    pub alive: usize,
    pub peak: usize,
    pub events: u64,
}

impl<'a> Population<'a> {
    pub fn new(config: &'a SimConfig) -> Self {
        Self {
            config,
            lifetime: Exp::new(config.model.lambda).expect("lambda validated > 0"),
            queue: BinaryHeap::new(),
            seq: 0,
            alive: 0,
            peak: 0,
            events: 0,
        }
    }

    /// Samples a new particle's life. Returns the position at the horizon
    /// when it survives that long.
    pub fn spawn<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        pos: f64,
        birth: f64,
        horizon: Option<f64>,
    ) -> Option<f64> {
        self.alive += 1;
        self.peak = self.peak.max(self.alive);
        let tau = self.lifetime.sample(rng);
        let end = simulate_life(
            rng,
            pos,
            birth,
            tau,
            horizon,
            self.config.dt,
            self.config.bridge_correction,
        );
        let (time, kind) = match end {
            LifeEnd::Hit { time } => (time, EventKind::Hit),
            LifeEnd::Died { time, pos } => (time, EventKind::Death { pos }),
            LifeEnd::Horizon { pos } => return Some(pos),
        };
        self.seq += 1;
        self.queue.push(Event {
            time,
            seq: self.seq,
            kind,
        });
        None
    }

    pub fn over_cap(&self) -> bool {
        self.alive > self.config.max_particles || self.events > self.config.max_events
    }
}

/// Runs one replicate of the process killed at the first barrier hit.
pub fn simulate_replicate<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> SimOutcome {
    let horizon = config.horizon;
    let g = &config.model.offspring;
    let mut pop = Population::new(config);
    let mut at_horizon = 0usize;
    if pop.spawn(rng, config.model.start_x, 0.0, horizon).is_some() {
        at_horizon += 1;
    }
    let mut last_time = 0.0;
    while let Some(ev) = pop.queue.pop() {
        last_time = ev.time;
        match ev.kind {
            EventKind::Hit => {
                return SimOutcome {
                    tag: OutcomeTag::HitBarrier,
                    elapsed: ev.time,
                    peak_population: pop.peak,
                };
            }
            EventKind::Death { pos } => {
                pop.events += 1;
                pop.alive -= 1;
                let children = g.sample_count(rng.random::<f64>());
                for _ in 0..children {
                    if pop.spawn(rng, pos, ev.time, horizon).is_some() {
                        at_horizon += 1;
                    }
                }
                if pop.over_cap() {
                    return SimOutcome {
                        tag: OutcomeTag::CapExceeded,
                        elapsed: ev.time,
                        peak_population: pop.peak,
                    };
                }
            }
        }
    }
    if at_horizon > 0 {
        SimOutcome {
            tag: OutcomeTag::AliveAtHorizonNoHit,
            elapsed: horizon.expect("survivors only exist with a horizon"),
            peak_population: pop.peak,
        }
    } else {
        SimOutcome {
            tag: OutcomeTag::ExtinctNoHit,
            elapsed: last_time,
            peak_population: pop.peak,
        }
    }
}
