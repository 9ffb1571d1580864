use rand::Rng;
use rand_distr::StandardNormal;

/// How a single particle's lifetime ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LifeEnd {
    /// Touched the barrier; `time` is the end of the step in which it did.
    Hit { time: f64 },
    /// Lifetime expired away from the barrier.
    Died { time: f64, pos: f64 },
    /// Still alive at the horizon.
    Horizon { pos: f64 },
}

/// Beyond this exponent the bridge crossing probability is below the
/// resolution of a 53-bit uniform, so no variate is drawn.
const BRIDGE_CUTOFF: f64 = 40.0;

/// Advances a Brownian path from `pos` at time `birth` for `lifetime` (clipped
/// at `horizon`) in steps of `dt`, the last one shortened.
///
/// With `bridge` set, a step between positive endpoints `w0`, `w1` of length
/// `h` also counts as a hit with probability `exp(-2 w0 w1 / h)`, the chance
/// that the Brownian bridge between them dipped below zero.
pub fn simulate_life<R: Rng + ?Sized>(
    rng: &mut R,
    pos: f64,
    birth: f64,
    lifetime: f64,
    horizon: Option<f64>,
    dt: f64,
    bridge: bool,
) -> LifeEnd {
    let death = birth + lifetime;
    let (end, clipped) = match horizon {
        Some(h) if death >= h => (h, true),
        _ => (death, false),
    };
    let span = (end - birth).max(0.0);
    let full_steps = (span / dt).floor();
    let last = span - full_steps * dt;
    let full_steps = full_steps as u64;
    let sqrt_dt = dt.sqrt();

    let mut w = pos;
    for k in 0..=full_steps {
        let h = if k < full_steps { dt } else { last };
        if h <= 0.0 {
            break;
        }
        let sd = if k < full_steps { sqrt_dt } else { h.sqrt() };
        let z: f64 = rng.sample(StandardNormal);
        let next = w + sd * z;
        let t = if k < full_steps {
            birth + (k + 1) as f64 * dt
        } else {
            end
        };
        if next <= 0.0 {
            return LifeEnd::Hit { time: t };
        }
        if bridge {
            let expo = 2.0 * w * next / h;
            if expo < BRIDGE_CUTOFF && rng.random::<f64>() < (-expo).exp() {
                return LifeEnd::Hit { time: t };
            }
        }
        w = next;
    }
    if clipped {
        LifeEnd::Horizon { pos: w }
    } else {
        LifeEnd::Died {
            time: death,
            pos: w,
        }
    }
}
