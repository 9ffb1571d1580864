//! Stationary profiles: `u''/2 + lambda (G(u) - u) = 0`, `u(0) = 0`,
//! `0 <= u <= 1`.
//!
//! For the binary model `G(u) = (1 + u^2) / 2` the profile is known in closed
//! form, `u(x) = 1 - 1 / (sqrt(lambda / 6) x + 1)^2`. For general `G` the
//! boundary-value problem is solved by shooting on the initial slope.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbm::{estimate_p, mix_seed, BbmError, PBounds, SimConfig};
use crate::offspring::OffspringPolynomial;
use crate::pde::{residual, Field, Grid1D, PdeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("BracketFailure: {0}")]
    BracketFailure(String),
    #[error("ResidualTooLarge: candidate residual {residual} exceeds {threshold}")]
    ResidualTooLarge { residual: f64, threshold: f64 },
    #[error(transparent)]
    Grid(#[from] PdeError),
    #[error(transparent)]
    Simulation(#[from] BbmError),
}

/// `u(x) = 1 - 1 / (a x + 1)^2` with `a = sqrt(lambda / 6)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub lambda: f64,
    pub a: f64,
}

impl ClosedForm {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            a: (lambda / 6.0).sqrt(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = self.a * x + 1.0;
        1.0 - 1.0 / (d * d)
    }

    /// `u'(x) = 2 a / (a x + 1)^3`.
    pub fn slope(&self, x: f64) -> f64 {
        let d = self.a * x + 1.0;
        2.0 * self.a / (d * d * d)
    }
}

pub fn closed_form(lambda: f64, x: f64) -> f64 {
    ClosedForm::new(lambda).value(x)
}

/// Max over `xs` of `|u''/2 + lambda (G(u) - u)|` for a function `u`, with
/// `u''` taken as the central second difference of step `h`.
pub fn stationary_residual(
    u: impl Fn(f64) -> f64,
    lambda: f64,
    offspring: &OffspringPolynomial,
    xs: &[f64],
    h: f64,
) -> f64 {
    xs.iter().fold(0.0, |m, &x| {
        let (a, b, c) = (u(x - h), u(x), u(x + h));
        let lap = 0.5 * (a - 2.0 * b + c) / (h * h);
        m.max((lap + lambda * (offspring.evaluate(b) - b)).abs())
    })
}

/// Residual of the closed form in the binary model, where the reaction is
/// `lambda (u - 1)^2 / 2`.
pub fn verify_closed_form(lambda: f64, xs: &[f64], h: f64) -> f64 {
    let cf = ClosedForm::new(lambda);
    xs.iter().fold(0.0, |m, &x| {
        let (a, b, c) = (cf.value(x - h), cf.value(x), cf.value(x + h));
        let lap = 0.5 * (a - 2.0 * b + c) / (h * h);
        m.max((lap + lambda * (b - 1.0).powi(2) / 2.0).abs())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Rose above the target.
    Overshoot,
    /// Turned back down while still short of the target.
    Undershoot,
    /// Reached the end of the domain without doing either.
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    pub length: f64,
    /// Far-field tolerance; also the undershoot margin below the target.
    pub tol: f64,
    /// Far-field value `u(inf)`. 1 for critical and subcritical laws.
    pub target: f64,
    /// Spacing of the returned profile.
    pub dx: f64,
    /// Relative tolerance of the adaptive integrator.
    pub rtol: f64,
}

impl ShootOptions {
    pub fn new(length: f64, tol: f64) -> Self {
        Self {
            length,
            tol,
            target: 1.0,
            dx: 0.01,
            rtol: 1e-10,
        }
    }
}

const OVERSHOOT_MARGIN: f64 = 1e-9;
const TURNING_SLOPE: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingResult {
    pub slope0: f64,
    pub profile: Field,
    pub converged: bool,
    pub target_value: f64,
    /// Right end of the stretch resolved by the slope bracket. Beyond it the
    /// profile is set to the target.
    pub resolved_to: f64,
}

struct Trajectory {
    values: Vec<f64>,
    verdict: Verdict,
}

/// Integrates the first-order system `u' = v`, `v' = -2 lambda (G(u) - u)`.
struct Shooter<'a> {
    lambda: f64,
    g: &'a OffspringPolynomial,
    grid: Grid1D,
    opts: ShootOptions,
}

impl Shooter<'_> {
    fn rhs(&self, y: [f64; 2]) -> [f64; 2] {
        [y[1], -2.0 * self.lambda * (self.g.evaluate(y[0]) - y[0])]
    }

    fn classify(&self, y: [f64; 2]) -> Option<Verdict> {
        if y[0] > self.opts.target + OVERSHOOT_MARGIN {
            Some(Verdict::Overshoot)
        } else if y[1] < TURNING_SLOPE && y[0] < self.opts.target - self.opts.tol {
            Some(Verdict::Undershoot)
        } else {
            None
        }
    }

    /// One Dormand-Prince 5(4) step; returns the 5th-order state and the
    /// scaled error norm.
    fn dopri(&self, y: [f64; 2], h: f64) -> ([f64; 2], f64) {
        const C: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let mut k = [[0.0; 2]; 7];
        k[0] = self.rhs(y);
        for s in 0..6 {
            let mut z = y;
            for (j, kj) in k.iter().enumerate().take(s + 1) {
                z[0] += h * C[s][j] * kj[0];
                z[1] += h * C[s][j] * kj[1];
            }
            k[s + 1] = self.rhs(z);
        }
        // Row 6 of the tableau is the 5th-order solution (FSAL).
        let mut y5 = y;
        for j in 0..6 {
            y5[0] += h * C[5][j] * k[j][0];
            y5[1] += h * C[5][j] * k[j][1];
        }
        let mut err = 0.0_f64;
        for c in 0..2 {
            let e = h * (0..7).map(|j| E[j] * k[j][c]).sum::<f64>();
            let scale = 1e-12 + self.opts.rtol * y[c].abs().max(y5[c].abs());
            err = err.max((e / scale).abs());
        }
        (y5, err)
    }

    fn trajectory(&self, slope0: f64) -> Trajectory {
        let dx = self.grid.dx();
        let nodes = self.grid.nodes();
        let mut values = Vec::with_capacity(nodes);
        let mut y = [0.0, slope0];
        values.push(0.0);
        let mut h = dx.min(0.1 / (1.0 + slope0.abs()));
        for _ in 1..nodes {
            let mut left = dx;
            while left > 0.0 {
                let step = h.min(left);
                let (next, err) = self.dopri(y, step);
                if err <= 1.0 || step < 1e-14 {
                    y = next;
                    left -= step;
                    if left < 1e-15 * dx {
                        left = 0.0;
                    }
                    if let Some(verdict) = self.classify(y) {
                        return Trajectory { values, verdict };
                    }
                    let grow = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    h = step * grow;
                } else {
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                }
            }
            values.push(y[0]);
        }
        Trajectory {
            values,
            verdict: Verdict::Undecided,
        }
    }
}

/// Shooting with the default far-field target `u(inf) = 1`.
pub fn shoot(
    lambda: f64,
    offspring: &OffspringPolynomial,
    length: f64,
    tol: f64,
) -> Result<ShootingResult, StationaryError> {
    shoot_with(lambda, offspring, &ShootOptions::new(length, tol))
}

/// Finds `u'(0)` by bisection between an undershooting and an overshooting
/// slope. The bracket starts at `[0, 10 sqrt(lambda)]` and the upper end
/// doubles (up to `2^20 sqrt(lambda)`) until it overshoots.
///
/// Supercritical laws are accepted, but the far field of the least solution
/// is then the extinction probability rather than 1; pass it as `target`.
pub fn shoot_with(
    lambda: f64,
    offspring: &OffspringPolynomial,
    opts: &ShootOptions,
) -> Result<ShootingResult, StationaryError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(StationaryError::InvalidInput(format!(
            "lambda = {lambda} must be > 0"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(StationaryError::InvalidInput(format!(
            "tol = {} must be > 0",
            opts.tol
        )));
    }
    let grid = Grid1D::with_spacing(opts.length, opts.dx)?;
    let shooter = Shooter {
        lambda,
        g: offspring,
        grid,
        opts: *opts,
    };

    let low = shooter.trajectory(0.0);
    if low.verdict != Verdict::Undershoot {
        return Err(StationaryError::BracketFailure(format!(
            "zero initial slope gives {:?}, not an undershoot",
            low.verdict
        )));
    }
    let scale = lambda.sqrt();
    let mut lo = (0.0, low);
    let mut hi_slope = 10.0 * scale;
    let mut hi = loop {
        let tr = shooter.trajectory(hi_slope);
        match tr.verdict {
            Verdict::Overshoot => break (hi_slope, tr),
            Verdict::Undecided => return Ok(finish(&shooter, hi_slope, tr.values, None)),
            Verdict::Undershoot => {
                lo = (hi_slope, tr);
                hi_slope *= 2.0;
                if hi_slope > 2f64.powi(20) * scale {
                    return Err(StationaryError::BracketFailure(format!(
                        "no overshoot for slopes up to {hi_slope}"
                    )));
                }
            }
        }
    };

    for _ in 0..400 {
        let mid = 0.5 * (lo.0 + hi.0);
        if mid <= lo.0 || mid >= hi.0 {
            break;
        }
        let tr = shooter.trajectory(mid);
        match tr.verdict {
            Verdict::Overshoot => hi = (mid, tr),
            Verdict::Undershoot => lo = (mid, tr),
            Verdict::Undecided => return Ok(finish(&shooter, mid, tr.values, None)),
        }
    }
    let slope = 0.5 * (lo.0 + hi.0);
    Ok(finish(&shooter, slope, lo.1.values, Some(hi.1.values)))
}

/// Assembles the profile from the bracketing trajectories: their average
/// while they agree within `tol`, the target beyond.
fn finish(shooter: &Shooter, slope0: f64, a: Vec<f64>, b: Option<Vec<f64>>) -> ShootingResult {
    let grid = shooter.grid;
    let opts = shooter.opts;
    let nodes = grid.nodes();
    let mut values = Vec::with_capacity(nodes);
    match b {
        None => values.extend_from_slice(&a),
        Some(b) => {
            for (u, w) in a.iter().zip(&b) {
                if (u - w).abs() > opts.tol {
                    break;
                }
                values.push(0.5 * (u + w));
            }
        }
    }
    let resolved = values.len().max(1);
    let last = *values.last().unwrap_or(&0.0);
    values.resize(nodes, opts.target);
    let converged = (last - opts.target).abs() < 10.0 * opts.tol
        && values.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v));
    ShootingResult {
        slope0,
        profile: Field { grid, values },
        converged,
        target_value: opts.target,
        resolved_to: grid.x(resolved - 1),
    }
}

/// Sampling plan for [`least_solution_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSolutionQuery {
    pub xs: Vec<f64>,
    pub n_reps: usize,
    /// Largest grid residual for which the candidate counts as stationary.
    pub residual_threshold: f64,
    /// Allowed excess of the simulated lower bound, in standard errors.
    pub sigmas: f64,
}

impl LeastSolutionQuery {
    pub fn new(xs: Vec<f64>, n_reps: usize) -> Self {
        Self {
            xs,
            n_reps,
            residual_threshold: 1e-2,
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSolutionPoint {
    pub x: f64,
    pub candidate: f64,
    pub bounds: PBounds,
    /// `candidate + k sigma - r_hat`; negative means the check failed here.
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSolutionReport {
    pub residual: f64,
    pub points: Vec<LeastSolutionPoint>,
    pub passed: bool,
}

/// Checks `p(x) <= candidate(x)` at the sampled points, where `p` is
/// estimated by simulation. The simulated lower bound `r(x, T)` is compared,
/// since only a lower bound on `p` can refute the inequality.
pub fn least_solution_check(
    candidate: &Field,
    lambda: f64,
    offspring: &OffspringPolynomial,
    mc: &SimConfig,
    query: &LeastSolutionQuery,
) -> Result<LeastSolutionReport, StationaryError> {
    let res = residual(candidate, lambda, offspring);
    if !(res <= query.residual_threshold) {
        return Err(StationaryError::ResidualTooLarge {
            residual: res,
            threshold: query.residual_threshold,
        });
    }
    let mut points = Vec::with_capacity(query.xs.len());
    for (i, &x) in query.xs.iter().enumerate() {
        if !(x > 0.0 && x <= candidate.grid.length) {
            return Err(StationaryError::InvalidInput(format!(
                "sample point {x} outside (0, {}]",
                candidate.grid.length
            )));
        }
        let mut cfg = mc.clone();
        cfg.model.lambda = lambda;
        cfg.model.offspring = offspring.clone();
        cfg.model.start_x = x;
        cfg.seed = mix_seed(mc.seed, i as u64);
        let bounds = estimate_p(&cfg, query.n_reps)?;
        let value = candidate.interpolate(x);
        let margin = value + query.sigmas * bounds.lower.sigma() - bounds.lower.mean;
        points.push(LeastSolutionPoint {
            x,
            candidate: value,
            bounds,
            margin,
            passed: margin >= 0.0,
        });
    }
    let passed = points.iter().all(|p| p.passed);
    Ok(LeastSolutionReport {
        residual: res,
        points,
        passed,
    })
}
