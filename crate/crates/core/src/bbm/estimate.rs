use serde::{Deserialize, Serialize};

use super::{
    replicate_rng, simulate_replicate, simulate_stopped, BbmError, OutcomeTag, SimConfig,
    SimOutcome,
};

/// Share of cap-exceeded replicates above which estimates are flagged.
pub const CAP_POLLUTION_THRESHOLD: f64 = 0.01;

const Z_95: f64 = 1.96;

/// Monte Carlo mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub n: usize,
    pub half_width_95: f64,
    /// Replicates that tripped a cap. Bernoulli estimates count them in `n`
    /// as failures; sample means leave them out of `n`.
    pub capped: usize,
    /// Replicates attempted, capped or not.
    pub replicates: usize,
}

impl EstimateWithCI {
    pub fn bernoulli(successes: usize, n: usize, capped: usize) -> Self {
        if n == 0 {
            return Self {
                mean: 0.0,
                n,
                half_width_95: 0.0,
                capped,
                replicates: n,
            };
        }
        let mean = successes as f64 / n as f64;
        Self {
            mean,
            n,
            half_width_95: Z_95 * (mean * (1.0 - mean) / n as f64).sqrt(),
            capped,
            replicates: n,
        }
    }

    /// Sample mean and standard error of arbitrary `[0, 1]`-valued draws.
    pub fn from_samples(samples: &[f64], capped: usize) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                n,
                half_width_95: 0.0,
                capped,
                replicates: capped,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            n,
            half_width_95: Z_95 * (var / n as f64).sqrt(),
            capped,
            replicates: n + capped,
        }
    }

    /// One standard error.
    pub fn sigma(&self) -> f64 {
        self.half_width_95 / Z_95
    }

    pub fn cap_fraction(&self) -> f64 {
        if self.replicates == 0 {
            0.0
        } else {
            self.capped as f64 / self.replicates as f64
        }
    }

    /// The capped share when it exceeds [`CAP_POLLUTION_THRESHOLD`].
    pub fn cap_pollution(&self) -> Option<f64> {
        let frac = self.cap_fraction();
        (frac > CAP_POLLUTION_THRESHOLD).then_some(frac)
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.sigma()
    }
}

/// Two-sided bracket `r(x,T) <= p(x) <= s(x,T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PBounds {
    pub lower: EstimateWithCI,
    pub upper: EstimateWithCI,
}

impl PBounds {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower.mean + self.upper.mean)
    }

    pub fn gap(&self) -> f64 {
        self.upper.mean - self.lower.mean
    }

    /// Half-width of the midpoint: sampling error plus half the truncation gap.
    pub fn half_width_95(&self) -> f64 {
        self.lower.half_width_95.max(self.upper.half_width_95) + 0.5 * self.gap()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounts {
    pub hit_barrier: usize,
    pub extinct_no_hit: usize,
    pub alive_at_horizon_no_hit: usize,
    pub cap_exceeded: usize,
}

/// Outcomes of `n` replicates, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub horizon: Option<f64>,
    pub outcomes: Vec<SimOutcome>,
}

impl ReplicateSet {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    fn check_time(&self, t: f64) -> Result<(), BbmError> {
        match self.horizon {
            Some(h) if t > h => Err(BbmError::BeyondHorizon { t, horizon: h }),
            _ => Ok(()),
        }
    }

    fn capped(&self) -> usize {
        self.tag_counts().cap_exceeded
    }

    /// Fraction extinct without a hit by time `t`.
    pub fn r_hat(&self, t: f64) -> Result<EstimateWithCI, BbmError> {
        self.check_time(t)?;
        let k = self
            .outcomes
            .iter()
            .filter(|o| o.tag == OutcomeTag::ExtinctNoHit && o.elapsed <= t)
            .count();
        Ok(EstimateWithCI::bernoulli(k, self.len(), self.capped()))
    }

    /// Fraction with no hit by time `t`. A capped replicate counts only when
    /// the cap tripped after `t`.
    pub fn s_hat(&self, t: f64) -> Result<EstimateWithCI, BbmError> {
        self.check_time(t)?;
        let k = self
            .outcomes
            .iter()
            .filter(|o| match o.tag {
                OutcomeTag::ExtinctNoHit | OutcomeTag::AliveAtHorizonNoHit => true,
                OutcomeTag::HitBarrier | OutcomeTag::CapExceeded => o.elapsed > t,
            })
            .count();
        Ok(EstimateWithCI::bernoulli(k, self.len(), self.capped()))
    }

    pub fn p_bounds(&self) -> Result<PBounds, BbmError> {
        let t = self.horizon.ok_or(BbmError::UnboundedHorizon)?;
        Ok(PBounds {
            lower: self.r_hat(t)?,
            upper: self.s_hat(t)?,
        })
    }

    pub fn tag_counts(&self) -> TagCounts {
        let mut c = TagCounts::default();
        for o in &self.outcomes {
            match o.tag {
                OutcomeTag::HitBarrier => c.hit_barrier += 1,
                OutcomeTag::ExtinctNoHit => c.extinct_no_hit += 1,
                OutcomeTag::AliveAtHorizonNoHit => c.alive_at_horizon_no_hit += 1,
                OutcomeTag::CapExceeded => c.cap_exceeded += 1,
            }
        }
        c
    }
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(n: usize, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..n as u64).into_par_iter().map(&f).collect();
    match threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("could not build a {k}-thread pool ({e}); using the global pool");
                run()
            }
        },
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(n: usize, _threads: Option<usize>, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n as u64).map(f).collect()
}

/// Runs `n` replicates. Replicate `i` always uses stream `i` of `config.seed`,
/// so the result does not depend on the worker count.
pub fn run_replicates(config: &SimConfig, n: usize) -> Result<ReplicateSet, BbmError> {
    config.validate()?;
    let outcomes = map_indexed(n, config.threads, |i| {
        simulate_replicate(config, &mut replicate_rng(config.seed, i))
    });
    let set = ReplicateSet {
        horizon: config.horizon,
        outcomes,
    };
    let capped = set.capped();
    if n > 0 && capped as f64 / n as f64 > CAP_POLLUTION_THRESHOLD {
        log::warn!(
            "CapPollution: {capped} of {n} replicates exceeded a cap (start_x = {})",
            config.model.start_x
        );
    }
    Ok(set)
}

/// Replicates truncated at `t`: outcomes at `t` do not depend on what
/// happens later, so there is no point simulating past it.
fn run_until(config: &SimConfig, t: f64, n_reps: usize) -> Result<Option<ReplicateSet>, BbmError> {
    config.validate()?;
    if let Some(h) = config.horizon {
        if t > h {
            return Err(BbmError::BeyondHorizon { t, horizon: h });
        }
    }
    if t < 0.0 || t.is_nan() {
        return Err(BbmError::InvalidConfig(format!(
            "query time {t} must be >= 0"
        )));
    }
    if t == 0.0 {
        return Ok(None);
    }
    let truncated = SimConfig {
        horizon: Some(t),
        ..config.clone()
    };
    run_replicates(&truncated, n_reps).map(Some)
}

/// `r(x, t)`: probability of extinction by `t` with no barrier hit.
pub fn estimate_r(config: &SimConfig, t: f64, n_reps: usize) -> Result<EstimateWithCI, BbmError> {
    match run_until(config, t, n_reps)? {
        Some(set) => set.r_hat(t),
        None => Ok(EstimateWithCI::bernoulli(0, n_reps, 0)),
    }
}

/// `s(x, t)`: probability of no barrier hit by `t`.
pub fn estimate_s(config: &SimConfig, t: f64, n_reps: usize) -> Result<EstimateWithCI, BbmError> {
    match run_until(config, t, n_reps)? {
        Some(set) => set.s_hat(t),
        None => Ok(EstimateWithCI::bernoulli(n_reps, n_reps, 0)),
    }
}

/// Brackets `p(x)` by `(r(x,T), s(x,T))` at the configured horizon `T`.
pub fn estimate_p(config: &SimConfig, n_reps: usize) -> Result<PBounds, BbmError> {
    if config.horizon.is_none() {
        return Err(BbmError::UnboundedHorizon);
    }
    run_replicates(config, n_reps)?.p_bounds()
}

/// `q^f(x, t)`: mean over replicates of the stopped process of the product of
/// `f` over particle positions at `t`. `f` should map into `[0, 1]`.
/// Capped replicates are left out of the mean and reported in `capped`.
pub fn estimate_q<F>(
    config: &SimConfig,
    f: &F,
    t: f64,
    n_reps: usize,
) -> Result<EstimateWithCI, BbmError>
where
    F: Fn(f64) -> f64 + Sync + ?Sized,
{
    config.validate()?;
    if let Some(h) = config.horizon {
        if t > h {
            return Err(BbmError::BeyondHorizon { t, horizon: h });
        }
    }
    let products = map_indexed(n_reps, config.threads, |i| {
        simulate_stopped(config, f, t, &mut replicate_rng(config.seed, i)).product
    });
    let capped = products.iter().filter(|p| p.is_none()).count();
    let samples: Vec<f64> = products.into_iter().flatten().collect();
    let est = EstimateWithCI::from_samples(&samples, capped);
    if n_reps > 0 && capped as f64 / n_reps as f64 > CAP_POLLUTION_THRESHOLD {
        log::warn!("CapPollution: {capped} of {n_reps} stopped-process replicates exceeded a cap");
    }
    Ok(est)
}
