use rand::Rng;

use super::{EventKind, Population, SimConfig};

/// State of the stopped process at the query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedOutcome {
    /// Product of `f` over all particle positions, frozen ones at `0`.
    /// `None` when a cap tripped before the query time.
    pub product: Option<f64>,
    /// Particles frozen at the barrier by the query time.
    pub frozen: usize,
    /// Particles still diffusing at the query time.
    pub alive: usize,
    pub peak_population: usize,
}

/// Runs the stopped process to time `t`: particles reaching the barrier stay
/// there forever instead of ending the replicate. Returns the product of `f`
/// over the configuration at `t` (empty product = 1).
///
/// Stops early once the product is exactly zero, since nothing can revive it.
pub fn simulate_stopped<R, F>(config: &SimConfig, f: &F, t: f64, rng: &mut R) -> StoppedOutcome
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64 + ?Sized,
{
    let g = &config.model.offspring;
    let at_barrier = f(0.0);
    let mut pop = Population::new(config);
    let mut product = 1.0;
    let mut frozen = 0usize;
    let mut survivors = 0usize;

    let done = |pop: &Population, product: f64, frozen, survivors| StoppedOutcome {
        product: Some(product),
        frozen,
        alive: survivors,
        peak_population: pop.peak,
    };

    if t <= 0.0 {
        return StoppedOutcome {
            product: Some(f(config.model.start_x)),
            frozen: 0,
            alive: 1,
            peak_population: 1,
        };
    }

    if let Some(pos) = pop.spawn(rng, config.model.start_x, 0.0, Some(t)) {
        survivors += 1;
        product *= f(pos);
    }
    while let Some(ev) = pop.queue.pop() {
        if product == 0.0 {
            return done(&pop, 0.0, frozen, survivors);
        }
        match ev.kind {
            EventKind::Hit => {
                pop.alive -= 1;
                frozen += 1;
                product *= at_barrier;
            }
            EventKind::Death { pos } => {
                pop.events += 1;
                pop.alive -= 1;
                let children = g.sample_count(rng.random::<f64>());
                for _ in 0..children {
                    if let Some(p) = pop.spawn(rng, pos, ev.time, Some(t)) {
                        survivors += 1;
                        product *= f(p);
                    }
                }
                if pop.over_cap() {
                    return StoppedOutcome {
                        product: None,
                        frozen,
                        alive: pop.alive,
                        peak_population: pop.peak,
                    };
                }
            }
        }
    }
    done(&pop, product, frozen, survivors)
}
