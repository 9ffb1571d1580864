//! Acceptance suite. One test per criterion; each prints a PASS/FAIL line.
//!
//! Run with `cargo test -p bbmlab --test acceptance -- --nocapture` to see
//! the report.

use std::time::{Duration, Instant};

use bbmlab::bbm::{estimate_p, estimate_q, run_replicates, ModelSpec, SimConfig};
use bbmlab::offspring::{decompose_reaction, recompose_reaction, ReactionPolynomial, Regime};
use bbmlab::pde::{evolve, residual, steady_state, EvolveSpec, Field, Grid1D, Scheme, SteadyState};
use bbmlab::stationary::{
    closed_form, least_solution_check, verify_closed_form, LeastSolutionQuery,
};
use bbmlab::OffspringPolynomial;

fn report(id: u32, name: &str, passed: bool, detail: String) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] AC{id} {name}: {detail}");
    assert!(passed, "AC{id} {name} failed: {detail}");
}

fn binary() -> OffspringPolynomial {
    OffspringPolynomial::binary()
}

fn supercritical() -> OffspringPolynomial {
    OffspringPolynomial::new(vec![0.25, 0.0, 0.75]).unwrap()
}

const LAMBDA: f64 = 6.0;
const PDE_DT: f64 = 0.01;
const STEADY_TOL: f64 = 1e-8;
const STEADY_T_MAX: f64 = 3000.0;

fn pde_grid() -> Grid1D {
    Grid1D::with_spacing(40.0, 0.02).unwrap()
}

fn steady_pair(g: &OffspringPolynomial) -> (SteadyState, SteadyState) {
    let grid = pde_grid();
    let r = steady_state(
        &EvolveSpec::r_type(LAMBDA, g.clone(), PDE_DT, Scheme::SemiImplicitCN),
        grid,
        STEADY_TOL,
        STEADY_T_MAX,
    )
    .unwrap();
    let s = steady_state(
        &EvolveSpec::s_type(LAMBDA, g.clone(), PDE_DT, Scheme::SemiImplicitCN),
        grid,
        STEADY_TOL,
        STEADY_T_MAX,
    )
    .unwrap();
    (r, s)
}

fn sim(g: OffspringPolynomial, x: f64, horizon: f64, seed: u64) -> SimConfig {
    SimConfig::new(ModelSpec::new(LAMBDA, g, x).unwrap())
        .with_horizon(horizon)
        .with_dt(1e-3)
        .with_seed(seed)
}

/// Independent oracle: bisection on G(q) - q over [0, 1 - 1e-9], returning the
/// smallest sign change found on a fine scan.
fn least_fixed_point_by_bisection(g: &OffspringPolynomial) -> f64 {
    let h = |q: f64| g.evaluate(q) - q;
    let scan = 10_000;
    for k in 0..scan {
        let a = k as f64 / scan as f64;
        let b = (k + 1) as f64 / scan as f64;
        if h(a) == 0.0 {
            return a;
        }
        if h(a) > 0.0 && h(b) < 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
    }
    1.0
}

#[test]
fn closed_form_verification() {
    let start = Instant::now();
    let xs: Vec<f64> = (0..=990).map(|i| 0.1 + i as f64 * 0.01).collect();
    let worst = [1.0, 6.0, 24.0]
        .iter()
        .map(|&l| verify_closed_form(l, &xs, 1e-4))
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    report(
        1,
        "closed-form residual",
        worst <= 1e-6 && elapsed < Duration::from_secs(1),
        format!("max residual {worst:.3e} (<= 1e-6), {elapsed:?} (< 1 s)"),
    );
}

#[test]
fn uniqueness_by_two_sided_convergence() {
    let start = Instant::now();
    let (r, s) = steady_pair(&binary());
    let cf = |x: f64| closed_form(LAMBDA, x);
    let dr = r.field.sup_distance_to(cf, 20.0);
    let ds = s.field.sup_distance_to(cf, 20.0);
    let elapsed = start.elapsed();
    report(
        2,
        "two-sided PDE convergence",
        dr <= 5e-3 && ds <= 5e-3 && r.converged && s.converged && elapsed < Duration::from_secs(120),
        format!(
            "|r - cf| = {dr:.2e}, |s - cf| = {ds:.2e} on [0,20] (<= 5e-3), t_r = {}, t_s = {}, {elapsed:?}",
            r.t_reached, s.t_reached
        ),
    );
}

#[test]
fn monte_carlo_triangulation() {
    let start = Instant::now();
    let horizon = 200.0;
    let bounds = estimate_p(&sim(binary(), 1.0, horizon, 3), 100_000).unwrap();
    let mc_elapsed = start.elapsed();

    let grid = pde_grid();
    let r_pde = evolve(
        &EvolveSpec::r_type(LAMBDA, binary(), PDE_DT, Scheme::SemiImplicitCN),
        grid,
        horizon,
    )
    .unwrap()
    .interpolate(1.0);
    let s_pde = evolve(
        &EvolveSpec::s_type(LAMBDA, binary(), PDE_DT, Scheme::SemiImplicitCN),
        grid,
        horizon,
    )
    .unwrap()
    .interpolate(1.0);

    let (lo, hi) = (bounds.lower, bounds.upper);
    let brackets = lo.mean - 3.0 * lo.sigma() <= 0.75 && 0.75 <= hi.mean + 3.0 * hi.sigma();
    let gap_ok = bounds.gap() <= 0.02;
    let lower_ok = lo.covers(r_pde, 3.0);
    let upper_ok = hi.covers(s_pde, 3.0);
    report(
        3,
        "Monte Carlo triangulation",
        brackets && gap_ok && lower_ok && upper_ok && mc_elapsed < Duration::from_secs(600),
        format!(
            "r_hat = {:.5} +- {:.5} (pde {r_pde:.5}), s_hat = {:.5} +- {:.5} (pde {s_pde:.5}), gap {:.2e}, capped {}, MC {mc_elapsed:?}",
            lo.mean,
            3.0 * lo.sigma(),
            hi.mean,
            3.0 * hi.sigma(),
            bounds.gap(),
            lo.capped
        ),
    );
}

#[test]
fn stationarity_of_product_functional() {
    let f = |y: f64| closed_form(LAMBDA, y.max(0.0));
    let mut ok = true;
    let mut detail = Vec::new();
    for (i, &x) in [0.5, 1.0, 2.0].iter().enumerate() {
        let cfg = sim(binary(), x, 10.0, 40 + i as u64);
        let est = estimate_q(&cfg, &f, 10.0, 100_000).unwrap();
        let target = closed_form(LAMBDA, x);
        let hit = est.covers(target, 3.0);
        ok &= hit;
        detail.push(format!(
            "x={x}: {:.5} +- {:.5} vs {target:.5}",
            est.mean,
            3.0 * est.sigma()
        ));
    }
    report(4, "q^u(x,t) = u(x)", ok, detail.join("; "));
}

#[test]
fn least_solution_property() {
    let grid = Grid1D::with_spacing(40.0, 0.01).unwrap();
    let cf = Field::from_fn(grid, |x| closed_form(LAMBDA, x));
    let ones = Field::constant(grid, 1.0);
    let mc = sim(binary(), 1.0, 200.0, 5);
    let query = LeastSolutionQuery::new(vec![0.5, 1.0, 2.0, 4.0], 20_000);

    let a = least_solution_check(&cf, LAMBDA, &binary(), &mc, &query).unwrap();
    let b = least_solution_check(&ones, LAMBDA, &binary(), &mc, &query).unwrap();
    let margins = |r: &bbmlab::stationary::LeastSolutionReport| {
        r.points
            .iter()
            .map(|p| format!("{}:{:+.4}", p.x, p.margin))
            .collect::<Vec<_>>()
            .join(" ")
    };
    // The closed form is p itself, so the bracket midpoint should sit on it.
    let tight = a.points.iter().all(|p| {
        (p.bounds.midpoint() - p.candidate).abs()
            <= 3.0 * p.bounds.lower.sigma().max(p.bounds.upper.sigma()) + 0.5 * p.bounds.gap()
    });
    report(
        5,
        "least non-negative solution",
        a.passed && b.passed && tight,
        format!(
            "closed form margins [{}] (residual {:.1e}); u=1 margins [{}]; midpoint matches closed form: {tight}",
            margins(&a),
            a.residual,
            margins(&b)
        ),
    );
}

#[test]
fn classification_and_extinction() {
    let cases = [
        (vec![0.5, 0.0, 0.5], Regime::Critical),
        (vec![0.75, 0.0, 0.25], Regime::Subcritical),
        (vec![0.25, 0.0, 0.75], Regime::Supercritical),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (coeffs, regime) in cases {
        let g = OffspringPolynomial::new(coeffs.clone()).unwrap();
        let q = g.extinction().unwrap();
        let oracle = least_fixed_point_by_bisection(&g);
        let c = g.classify();
        let this = c.regime == regime && (q - oracle).abs() <= 1e-10;
        let expected_q = if regime == Regime::Supercritical {
            1.0 / 3.0
        } else {
            1.0
        };
        let this = this && (q - expected_q).abs() <= 1e-10;
        ok &= this;
        detail.push(format!(
            "{coeffs:?} -> {}, m={}, q*={q} (oracle {oracle})",
            c.regime, c.mean_offspring
        ));
    }
    report(6, "classification and extinction", ok, detail.join("; "));
}

#[test]
fn supercritical_gap() {
    let g = supercritical();
    let (r, s) = steady_pair(&g);
    let pde_gap = r.field.sup_distance_within(&s.field, 20.0);

    let set = run_replicates(&sim(g, 1.0, 20.0, 7), 20_000).unwrap();
    let b = set.p_bounds().unwrap();
    let mc_gap = b.gap();
    report(
        7,
        "supercritical r/s gap",
        pde_gap >= 0.01 && mc_gap >= 0.01,
        format!(
            "PDE sup|r - s| on [0,20] = {pde_gap:.3e} (needs >= 0.01), whole domain {:.3e}; MC r_hat = {:.4}, s_hat = {:.4}, gap {mc_gap:.3e} (needs >= 0.01)",
            r.field.sup_distance_within(&s.field, 40.0),
            b.lower.mean,
            b.upper.mean
        ),
    );
}

#[test]
fn decomposition_round_trip() {
    let f = vec![3.0, -6.0, 3.0];
    let (lambda, g) = decompose_reaction(&ReactionPolynomial::new(f.clone())).unwrap();
    let back = recompose_reaction(lambda, &g);
    let err = f
        .iter()
        .zip(&back)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    report(
        8,
        "reaction decomposition",
        lambda == 6.0 && g == binary() && back.len() == f.len() && err <= 1e-12,
        format!(
            "lambda = {lambda}, G = {:?}, recomposition error {err:.1e}",
            g.coeffs()
        ),
    );
}

#[test]
fn property_suites() {
    let start = Instant::now();
    let mut failures = Vec::new();

    // Simulation sandwich and monotonicity on one replicate set.
    let set = run_replicates(&sim(binary(), 1.0, 20.0, 9), 5_000).unwrap();
    let mut prev = (0.0, 1.0);
    for t in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        let r = set.r_hat(t).unwrap().mean;
        let s = set.s_hat(t).unwrap().mean;
        if !(r <= s && r >= prev.0 && s <= prev.1) {
            failures.push(format!("bbm sandwich at t={t}"));
        }
        prev = (r, s);
    }

    // Determinism under thread-count variation.
    let mut one = sim(binary(), 1.0, 20.0, 10);
    one.threads = Some(1);
    let mut four = one.clone();
    four.threads = Some(4);
    if run_replicates(&one, 2_000).unwrap() != run_replicates(&four, 2_000).unwrap() {
        failures.push("thread-count determinism".into());
    }

    // PDE sandwich, monotonicity and range on a coarse explicit run.
    let grid = Grid1D::with_spacing(10.0, 0.05).unwrap();
    let mk = |s: EvolveSpec| EvolveSpec {
        dt: s.explicit_step_bound(&grid),
        ..s
    };
    let r_spec = mk(EvolveSpec::r_type(
        LAMBDA,
        binary(),
        1.0,
        Scheme::ExplicitEuler,
    ));
    let s_spec = mk(EvolveSpec::s_type(
        LAMBDA,
        binary(),
        1.0,
        Scheme::ExplicitEuler,
    ));
    let times: Vec<f64> = (1..=20).map(|k| k as f64 * 0.5).collect();
    let rs = bbmlab::pde::evolve_snapshots(&r_spec, grid, &times).unwrap();
    let ss = bbmlab::pde::evolve_snapshots(&s_spec, grid, &times).unwrap();
    let mut prev_r = Field::constant(grid, 0.0);
    let mut prev_s = Field::constant(grid, 1.0);
    for ((_, r), (_, s)) in rs.iter().zip(&ss) {
        let ordered = r.values.iter().zip(&s.values).all(|(a, b)| a <= b);
        let monotone = r.values.iter().zip(&prev_r.values).all(|(a, b)| a >= b)
            && s.values.iter().zip(&prev_s.values).all(|(a, b)| a <= b);
        if !(ordered && monotone && r.is_probability_valued() && s.is_probability_valued()) {
            failures.push("pde sandwich/range".into());
            break;
        }
        prev_r = r.clone();
        prev_s = s.clone();
    }

    // Second-order convergence of the grid residual and of the closed-form check.
    let res_at = |dx: f64| {
        let g = Grid1D::with_spacing(10.0, dx).unwrap();
        residual(
            &Field::from_fn(g, |x| closed_form(LAMBDA, x)),
            LAMBDA,
            &binary(),
        )
    };
    let grid_ratio = res_at(0.02) / res_at(0.01);
    let xs: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
    let h_ratio = verify_closed_form(LAMBDA, &xs, 1e-2) / verify_closed_form(LAMBDA, &xs, 1e-3);
    if !(3.5..=4.5).contains(&grid_ratio) {
        failures.push(format!("dx ratio {grid_ratio}"));
    }
    if !(80.0..=120.0).contains(&h_ratio) {
        failures.push(format!("h ratio {h_ratio}"));
    }

    let elapsed = start.elapsed();
    report(
        9,
        "property suites",
        failures.is_empty() && elapsed < Duration::from_secs(300),
        format!(
            "dx-halving residual ratio {grid_ratio:.3}, h/10 ratio {h_ratio:.1}, failures {failures:?}, {elapsed:?}"
        ),
    );
}
