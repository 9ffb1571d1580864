//! Finite differences for `u_t = u_xx / 2 + lambda (G(u) - u)` on `[0, L]`.
//!
//! The left boundary is the barrier, `u(0, t) = 0`. The right end is either
//! Dirichlet or zero-flux; the zero-flux end uses a mirrored ghost node so the
//! last grid point is a genuine unknown. The reaction is always explicit; the
//! `SemiImplicitCN` scheme treats diffusion with Crank-Nicolson.
//!
//! With `G(u) = (1 + u^2) / 2` the reaction is `lambda (u - 1)^2 / 2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::offspring::OffspringPolynomial;

/// Magnitude beyond which a probability-valued solution is declared unstable.
pub const INSTABILITY_BOUND: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid evolution spec: {0}")]
    InvalidSpec(String),
    #[error("time step {dt} exceeds the explicit stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("Instability: u[{index}] = {value} at t = {t}")]
    Instability { t: f64, index: usize, value: f64 },
}

/// Uniform grid on `[0, L]` with `nx` interior points and two boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub length: f64,
    pub nx: usize,
}

impl Grid1D {
    pub fn new(length: f64, nx: usize) -> Result<Self, PdeError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(PdeError::InvalidGrid(format!(
                "length {length} must be > 0"
            )));
        }
        if nx < 3 {
            return Err(PdeError::InvalidGrid(format!(
                "nx = {nx} must be at least 3"
            )));
        }
        Ok(Self { length, nx })
    }

    /// Grid whose spacing is `dx` (rounded so that `L / dx` is whole).
    pub fn with_spacing(length: f64, dx: f64) -> Result<Self, PdeError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(PdeError::InvalidGrid(format!("dx {dx} must be > 0")));
        }
        let cells = (length / dx).round().max(1.0) as usize;
        Self::new(length, cells.saturating_sub(1))
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.nx + 1) as f64
    }

    /// Number of nodes including both boundaries.
    pub fn nodes(&self) -> usize {
        self.nx + 2
    }

    pub fn x(&self, i: usize) -> f64 {
        // One rounding instead of two keeps printed coordinates short.
        i as f64 * self.length / (self.nx + 1) as f64
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes()).map(move |i| self.x(i))
    }

    /// Index of the last node with `x <= bound`.
    pub fn last_index_within(&self, bound: f64) -> usize {
        let i = (bound / self.dx() + 1e-9).floor();
        (i.max(0.0) as usize).min(self.nodes() - 1)
    }
}

/// Nodal values on a grid, boundary nodes included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl Field {
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.xs().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.nodes()],
        }
    }

    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self, PdeError> {
        if values.len() != grid.nodes() {
            return Err(PdeError::InvalidGrid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::InvalidGrid("non-finite field value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn is_probability_valued(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Piecewise-linear interpolation, clamped to `[0, L]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let dx = self.grid.dx();
        let s = (x / dx).clamp(0.0, (self.grid.nodes() - 1) as f64);
        let i = (s.floor() as usize).min(self.grid.nodes() - 2);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Sup-norm distance to `other` over nodes with `x <= bound`.
    pub fn sup_distance_within(&self, other: &Field, bound: f64) -> f64 {
        let last = self
            .grid
            .last_index_within(bound)
            .min(other.values.len() - 1);
        self.values[..=last]
            .iter()
            .zip(&other.values[..=last])
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Sup-norm distance to a function over nodes with `x <= bound`.
    pub fn sup_distance_to(&self, f: impl Fn(f64) -> f64, bound: f64) -> f64 {
        let last = self.grid.last_index_within(bound);
        (0..=last).fold(0.0, |m, i| {
            m.max((self.values[i] - f(self.grid.x(i))).abs())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// `u(x, 0) = 0`: the extinct-without-hit probability `r`.
    Zero,
    /// `u(x, 0) = 1`: the no-hit probability `s`.
    One,
    Custom(Field),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RightBoundary {
    Dirichlet(f64),
    NeumannZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    ExplicitEuler,
    SemiImplicitCN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveSpec {
    pub lambda: f64,
    pub offspring: OffspringPolynomial,
    pub ic: InitialCondition,
    pub right_bc: RightBoundary,
    pub dt: f64,
    pub scheme: Scheme,
}

impl EvolveSpec {
    /// `r`-type run: zero start, zero-flux far end.
    pub fn r_type(lambda: f64, offspring: OffspringPolynomial, dt: f64, scheme: Scheme) -> Self {
        Self {
            lambda,
            offspring,
            ic: InitialCondition::Zero,
            right_bc: RightBoundary::NeumannZero,
            dt,
            scheme,
        }
    }

    /// `s`-type run: unit start, `u(L) = 1`.
    pub fn s_type(lambda: f64, offspring: OffspringPolynomial, dt: f64, scheme: Scheme) -> Self {
        Self {
            lambda,
            offspring,
            ic: InitialCondition::One,
            right_bc: RightBoundary::Dirichlet(1.0),
            dt,
            scheme,
        }
    }

    /// Largest explicit step keeping `[0, 1]`-valued data in `[0, 1]`:
    /// `1 / (1/dx^2 + lambda max(1, G'(1)))`. Also below `dx^2`.
    pub fn explicit_step_bound(&self, grid: &Grid1D) -> f64 {
        let dx = grid.dx();
        let m = self.offspring.mean_offspring().max(1.0);
        1.0 / (1.0 / (dx * dx) + self.lambda * m)
    }

    pub fn initial_field(&self, grid: Grid1D) -> Result<Field, PdeError> {
        let mut u = match &self.ic {
            InitialCondition::Zero => Field::constant(grid, 0.0),
            InitialCondition::One => Field::constant(grid, 1.0),
            InitialCondition::Custom(f) => {
                if f.grid != grid {
                    return Err(PdeError::InvalidSpec(
                        "custom initial field is on another grid".into(),
                    ));
                }
                f.clone()
            }
        };
        apply_boundaries(&mut u.values, self.right_bc);
        Ok(u)
    }

    fn validate(&self, grid: &Grid1D) -> Result<(), PdeError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(PdeError::InvalidSpec(format!(
                "lambda = {} must be > 0",
                self.lambda
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PdeError::InvalidSpec(format!(
                "dt = {} must be > 0",
                self.dt
            )));
        }
        if self.scheme == Scheme::ExplicitEuler {
            let bound = self.explicit_step_bound(grid);
            if self.dt > bound {
                return Err(PdeError::StepTooLarge { dt: self.dt, bound });
            }
        }
        Ok(())
    }
}

fn apply_boundaries(u: &mut [f64], right: RightBoundary) {
    u[0] = 0.0;
    if let RightBoundary::Dirichlet(v) = right {
        let n = u.len();
        u[n - 1] = v;
    }
}

/// Reusable time stepper; the Crank-Nicolson matrix is factored once.
#[derive(Debug, Clone)]
pub struct Stepper {
    lambda: f64,
    offspring: OffspringPolynomial,
    right: RightBoundary,
    scheme: Scheme,
    dt: f64,
    dx: f64,
    // Thomas-algorithm factors for (I - dt/2 A) over the unknown nodes.
    sub: Vec<f64>,
    diag_inv: Vec<f64>,
    sup_mod: Vec<f64>,
    rhs: Vec<f64>,
    next: Vec<f64>,
}

impl Stepper {
    pub fn new(spec: &EvolveSpec, grid: &Grid1D) -> Result<Self, PdeError> {
        spec.validate(grid)?;
        Ok(Self::build(spec, grid, spec.dt))
    }

    fn build(spec: &EvolveSpec, grid: &Grid1D, dt: f64) -> Self {
        let dx = grid.dx();
        let unknowns = match spec.right_bc {
            RightBoundary::Dirichlet(_) => grid.nx,
            RightBoundary::NeumannZero => grid.nx + 1,
        };
        let mut s = Self {
            lambda: spec.lambda,
            offspring: spec.offspring.clone(),
            right: spec.right_bc,
            scheme: spec.scheme,
            dt,
            dx,
            sub: Vec::new(),
            diag_inv: Vec::new(),
            sup_mod: Vec::new(),
            rhs: vec![0.0; unknowns],
            next: vec![0.0; grid.nodes()],
        };
        if spec.scheme == Scheme::SemiImplicitCN {
            s.factor(unknowns);
        }
        s
    }

    // A = (1/2) D^2 / dx^2 on the unknowns; the Neumann row reads
    // (2 u_{N-1} - 2 u_N) / (2 dx^2).
    fn factor(&mut self, m: usize) {
        let k = 0.5 * self.dt * 0.5 / (self.dx * self.dx);
        let mut sub = vec![-k; m];
        let diag = vec![1.0 + 2.0 * k; m];
        let sup = vec![-k; m];
        if self.right == RightBoundary::NeumannZero {
            sub[m - 1] = -2.0 * k;
        }
        let mut sup_mod = vec![0.0; m];
        let mut diag_inv = vec![0.0; m];
        let mut d = diag[0];
        diag_inv[0] = 1.0 / d;
        sup_mod[0] = sup[0] / d;
        for i in 1..m {
            d = diag[i] - sub[i] * sup_mod[i - 1];
            diag_inv[i] = 1.0 / d;
            sup_mod[i] = sup[i] / d;
        }
        self.sub = sub;
        self.diag_inv = diag_inv;
        self.sup_mod = sup_mod;
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn reaction(&self, u: f64) -> f64 {
        self.lambda * (self.offspring.evaluate(u) - u)
    }

    /// `(1/2) D^2 u` at node `i`, with the ghost node mirrored at the Neumann end.
    fn half_laplacian(&self, u: &[f64], i: usize) -> f64 {
        let last = u.len() - 1;
        let right = if i == last { u[last - 1] } else { u[i + 1] };
        0.5 * (u[i - 1] - 2.0 * u[i] + right) / (self.dx * self.dx)
    }

    /// Advances `u` in place by one step. `t` is only used for error reports.
    pub fn advance(&mut self, u: &mut [f64], t: f64) -> Result<(), PdeError> {
        let nodes = u.len();
        let last_unknown = match self.right {
            RightBoundary::Dirichlet(_) => nodes - 2,
            RightBoundary::NeumannZero => nodes - 1,
        };
        match self.scheme {
            Scheme::ExplicitEuler => {
                let mut next = std::mem::take(&mut self.next);
                for i in 1..=last_unknown {
                    next[i] = u[i] + self.dt * (self.half_laplacian(u, i) + self.reaction(u[i]));
                }
                u[1..=last_unknown].copy_from_slice(&next[1..=last_unknown]);
                self.next = next;
            }
            Scheme::SemiImplicitCN => {
                let half = 0.5 * self.dt;
                for (row, i) in (1..=last_unknown).enumerate() {
                    self.rhs[row] =
                        u[i] + half * self.half_laplacian(u, i) + self.dt * self.reaction(u[i]);
                }
                if let RightBoundary::Dirichlet(v) = self.right {
                    // Implicit half of the boundary coupling.
                    let m = self.rhs.len();
                    self.rhs[m - 1] += half * 0.5 * v / (self.dx * self.dx);
                }
                self.solve_tridiagonal();
                u[1..=last_unknown].copy_from_slice(&self.rhs);
            }
        }
        apply_boundaries(u, self.right);
        check_stability(u, t + self.dt)
    }

    fn solve_tridiagonal(&mut self) {
        let m = self.rhs.len();
        let d = &mut self.rhs;
        d[0] *= self.diag_inv[0];
        for i in 1..m {
            d[i] = (d[i] - self.sub[i] * d[i - 1]) * self.diag_inv[i];
        }
        for i in (0..m - 1).rev() {
            d[i] -= self.sup_mod[i] * d[i + 1];
        }
    }
}

fn check_stability(u: &[f64], t: f64) -> Result<(), PdeError> {
    for (index, &value) in u.iter().enumerate() {
        if !value.is_finite() || value.abs() > INSTABILITY_BOUND {
            return Err(PdeError::Instability { t, index, value });
        }
    }
    Ok(())
}

/// One time step of length `spec.dt`.
pub fn step(u: &Field, spec: &EvolveSpec) -> Result<Field, PdeError> {
    let mut stepper = Stepper::new(spec, &u.grid)?;
    let mut out = u.clone();
    stepper.advance(&mut out.values, 0.0)?;
    Ok(out)
}

/// Solution at time `t_end`. The step is shrunk to `t_end / ceil(t_end / dt)`
/// so the run lands exactly on `t_end`.
pub fn evolve(spec: &EvolveSpec, grid: Grid1D, t_end: f64) -> Result<Field, PdeError> {
    let mut u = spec.initial_field(grid)?;
    advance_field(spec, &mut u, 0.0, t_end)?;
    Ok(u)
}

/// Solution at each of `times` (sorted ascending).
pub fn evolve_snapshots(
    spec: &EvolveSpec,
    grid: Grid1D,
    times: &[f64],
) -> Result<Vec<(f64, Field)>, PdeError> {
    let mut u = spec.initial_field(grid)?;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(PdeError::InvalidSpec(
                "snapshot times must be ascending".into(),
            ));
        }
        advance_field(spec, &mut u, t, target - t)?;
        t = target;
        out.push((t, u.clone()));
    }
    Ok(out)
}

fn advance_field(spec: &EvolveSpec, u: &mut Field, t0: f64, span: f64) -> Result<(), PdeError> {
    if !(span >= 0.0) {
        return Err(PdeError::InvalidSpec(format!(
            "time span {span} must be >= 0"
        )));
    }
    spec.validate(&u.grid)?;
    if span == 0.0 {
        return Ok(());
    }
    let steps = (span / spec.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = span / steps as f64;
    let mut stepper = Stepper::build(spec, &u.grid, dt);
    let mut t = t0;
    for _ in 0..steps {
        stepper.advance(&mut u.values, t)?;
        t += dt;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub field: Field,
    pub converged: bool,
    pub t_reached: f64,
}

/// Evolves in unit-time chunks until `sup |u(t+1) - u(t)| < tol` or `t_max`.
pub fn steady_state(
    spec: &EvolveSpec,
    grid: Grid1D,
    tol: f64,
    t_max: f64,
) -> Result<SteadyState, PdeError> {
    if !(tol > 0.0) {
        return Err(PdeError::InvalidSpec(format!("tol = {tol} must be > 0")));
    }
    const CHUNK: f64 = 1.0;
    let mut u = spec.initial_field(grid)?;
    let mut t = 0.0;
    let mut prev = u.values.clone();
    while t < t_max {
        let span = CHUNK.min(t_max - t);
        advance_field(spec, &mut u, t, span)?;
        t += span;
        let change = u
            .values
            .iter()
            .zip(&prev)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            / span;
        if change < tol {
            return Ok(SteadyState {
                field: u,
                converged: true,
                t_reached: t,
            });
        }
        prev.copy_from_slice(&u.values);
    }
    Ok(SteadyState {
        field: u,
        converged: false,
        t_reached: t,
    })
}

/// `sup_i |(1/2) D^2 u_i + lambda (G(u_i) - u_i)|` over interior nodes.
pub fn residual(u: &Field, lambda: f64, offspring: &OffspringPolynomial) -> f64 {
    let dx = u.grid.dx();
    let v = &u.values;
    (1..v.len() - 1).fold(0.0, |m, i| {
        let lap = 0.5 * (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (dx * dx);
        m.max((lap + lambda * (offspring.evaluate(v[i]) - v[i])).abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary::closed_form;

    fn binary() -> OffspringPolynomial {
        OffspringPolynomial::binary()
    }

    #[test]
    fn grid_geometry() {
        let g = Grid1D::new(1.0, 9).unwrap();
        assert!((g.dx() - 0.1).abs() < 1e-15);
        assert_eq!(g.nodes(), 11);
        assert!((g.x(10) - 1.0).abs() < 1e-15);
        assert!(Grid1D::new(1.0, 2).is_err());
        assert!(Grid1D::new(0.0, 10).is_err());
        let g = Grid1D::with_spacing(40.0, 0.02).unwrap();
        assert_eq!(g.nx, 1999);
        assert!((g.dx() - 0.02).abs() < 1e-15);
        assert_eq!(g.last_index_within(20.0), 1000);
    }

    #[test]
    fn unit_field_is_fixed_away_from_barrier() {
        let grid = Grid1D::new(1.0, 19).unwrap();
        for scheme in [Scheme::ExplicitEuler, Scheme::SemiImplicitCN] {
            let spec = EvolveSpec::s_type(6.0, binary(), 1e-4, scheme);
            let u = spec.initial_field(grid).unwrap();
            let next = step(&u, &spec).unwrap();
            assert_eq!(next.values[0], 0.0);
            for i in 8..next.values.len() {
                assert!((next.values[i] - 1.0).abs() < 1e-12, "{scheme:?} node {i}");
            }
        }
    }

    #[test]
    fn zero_field_gains_reaction() {
        let grid = Grid1D::new(1.0, 20).unwrap();
        let dt = 1e-4;
        let spec = EvolveSpec::r_type(6.0, binary(), dt, Scheme::ExplicitEuler);
        let u = step(&Field::constant(grid, 0.0), &spec).unwrap();
        assert_eq!(u.values[0], 0.0);
        for i in 1..u.values.len() {
            assert!((u.values[i] - 3.0 * dt).abs() < 1e-15, "{i}");
        }
    }

    #[test]
    fn closed_form_is_nearly_stationary_under_a_step() {
        let lambda = 6.0;
        let grid = Grid1D::new(10.0, 999).unwrap();
        let dx = grid.dx();
        let cf = Field::from_fn(grid, |x| closed_form(lambda, x));
        let right = *cf.values.last().unwrap();
        for (scheme, dt) in [
            (Scheme::ExplicitEuler, 5e-5),
            (Scheme::SemiImplicitCN, 1e-3),
        ] {
            let spec = EvolveSpec {
                lambda,
                offspring: binary(),
                ic: InitialCondition::Custom(cf.clone()),
                right_bc: RightBoundary::Dirichlet(right),
                dt,
                scheme,
            };
            let next = step(&cf, &spec).unwrap();
            let change = next.sup_distance_within(&cf, 10.0);
            // Truncation error of the second difference is (1/2)(dx^2/12)|u''''| <= 5 dx^2.
            assert!(change <= 5.0 * dt * dx * dx + 1e-15, "{scheme:?}: {change}");
        }
    }

    #[test]
    fn explicit_step_bound_is_enforced() {
        let grid = Grid1D::new(1.0, 99).unwrap();
        let spec = EvolveSpec::r_type(6.0, binary(), 1e-3, Scheme::ExplicitEuler);
        assert!(matches!(
            Stepper::new(&spec, &grid),
            Err(PdeError::StepTooLarge { .. })
        ));
        let ok = EvolveSpec {
            dt: spec.explicit_step_bound(&grid),
            ..spec
        };
        assert!(Stepper::new(&ok, &grid).is_ok());
        assert!(ok.dt <= grid.dx() * grid.dx());
    }

    #[test]
    fn instability_is_detected() {
        let grid = Grid1D::new(1.0, 9).unwrap();
        let spec = EvolveSpec {
            ic: InitialCondition::Custom(Field::constant(grid, 9.9)),
            ..EvolveSpec::r_type(6.0, binary(), 0.01, Scheme::SemiImplicitCN)
        };
        assert!(matches!(
            evolve(&spec, grid, 5.0),
            Err(PdeError::Instability { .. })
        ));
    }

    #[test]
    fn zero_time_returns_initial_condition() {
        let grid = Grid1D::new(4.0, 39).unwrap();
        let spec = EvolveSpec::s_type(6.0, binary(), 1e-3, Scheme::SemiImplicitCN);
        let u = evolve(&spec, grid, 0.0).unwrap();
        assert_eq!(u, spec.initial_field(grid).unwrap());
        assert_eq!(u.values[0], 0.0);
        assert!(u.values[1..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn residual_examples() {
        let grid = Grid1D::new(10.0, 9999).unwrap();
        let cf = Field::from_fn(grid, |x| closed_form(6.0, x));
        assert!(residual(&cf, 6.0, &binary()) <= 1e-4);
        assert_eq!(residual(&Field::constant(grid, 1.0), 6.0, &binary()), 0.0);
        assert_eq!(residual(&Field::constant(grid, 0.0), 6.0, &binary()), 3.0);
    }

    #[test]
    fn identity_offspring_is_plain_heat_flow() {
        // Zero reaction, u(0) = 0, u(L) = 1: relaxes to the linear profile x / L.
        let grid = Grid1D::new(1.0, 19).unwrap();
        let g = OffspringPolynomial::new(vec![0.0, 1.0]).unwrap();
        let spec = EvolveSpec {
            right_bc: RightBoundary::Dirichlet(1.0),
            ..EvolveSpec::r_type(6.0, g, 1e-3, Scheme::SemiImplicitCN)
        };
        let ss = steady_state(&spec, grid, 1e-10, 200.0).unwrap();
        assert!(ss.converged);
        assert!(ss.field.sup_distance_to(|x| x, 1.0) < 1e-8);
    }

    #[test]
    fn interpolation_is_linear_between_nodes() {
        let grid = Grid1D::new(1.0, 9).unwrap();
        let f = Field::from_fn(grid, |x| 2.0 * x);
        assert!((f.interpolate(0.35) - 0.7).abs() < 1e-12);
        assert_eq!(f.interpolate(5.0), 2.0);
    }
}
