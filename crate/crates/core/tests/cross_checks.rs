//! The three routes to p(x) checked against each other and against analytic
//! special cases.

use bbmlab::bbm::{
    estimate_q, estimate_r, estimate_s, run_replicates, ModelSpec, OutcomeTag, SimConfig,
};
use bbmlab::offspring::OffspringPolynomial;
use bbmlab::pde::{evolve, steady_state, EvolveSpec, Field, Grid1D, Scheme};
use bbmlab::stationary::{closed_form, shoot, shoot_with, ShootOptions};

fn binary() -> OffspringPolynomial {
    OffspringPolynomial::binary()
}

fn cfg(g: OffspringPolynomial, x: f64) -> SimConfig {
    SimConfig::new(ModelSpec::new(6.0, g, x).unwrap()).with_seed(99)
}

fn pde_at(ic_one: bool, g: OffspringPolynomial, t: f64, x: f64) -> f64 {
    let grid = Grid1D::with_spacing(40.0, 0.02).unwrap();
    let spec = if ic_one {
        EvolveSpec::s_type(6.0, g, 0.01, Scheme::SemiImplicitCN)
    } else {
        EvolveSpec::r_type(6.0, g, 0.01, Scheme::SemiImplicitCN)
    };
    evolve(&spec, grid, t).unwrap().interpolate(x)
}

#[test]
fn unbounded_horizon_no_hit_fraction_matches_closed_form() {
    let set = run_replicates(&cfg(binary(), 1.0), 100_000).unwrap();
    let c = set.tag_counts();
    assert_eq!(c.cap_exceeded, 0);
    assert_eq!(c.alive_at_horizon_no_hit, 0);
    let n = set.len() as f64;
    let p = 1.0 - c.hit_barrier as f64 / n;
    let half = 1.96 * (p * (1.0 - p) / n).sqrt();
    assert!((p - 0.75).abs() <= 3.0 * half, "{p} +- {half}");
}

#[test]
fn r_and_s_match_pde_at_finite_time() {
    let t = 50.0;
    let r = estimate_r(&cfg(binary(), 1.0), t, 10_000).unwrap();
    let s = estimate_s(&cfg(binary(), 1.0), t, 10_000).unwrap();
    let r_pde = pde_at(false, binary(), t, 1.0);
    let s_pde = pde_at(true, binary(), t, 1.0);
    assert!(r.covers(r_pde, 3.0), "r {} vs {r_pde}", r.mean);
    assert!(s.covers(s_pde, 3.0), "s {} vs {s_pde}", s.mean);
}

#[test]
fn r_and_s_match_pde_at_short_time() {
    // Early on the sandwich is wide: many populations are still alive.
    let t = 0.5;
    let r = estimate_r(&cfg(binary(), 1.0), t, 20_000).unwrap();
    let s = estimate_s(&cfg(binary(), 1.0), t, 20_000).unwrap();
    let r_pde = pde_at(false, binary(), t, 1.0);
    let s_pde = pde_at(true, binary(), t, 1.0);
    assert!(s.mean - r.mean > 0.2);
    assert!(r.covers(r_pde, 3.0), "r {} vs {r_pde}", r.mean);
    assert!(s.covers(s_pde, 3.0), "s {} vs {s_pde}", s.mean);
}

#[test]
fn pure_death_matches_killed_brownian_motion() {
    // One particle killed at rate lambda: P(hit 0 first) = exp(-x sqrt(2 lambda)).
    let g = OffspringPolynomial::new(vec![1.0]).unwrap();
    let x = 0.4;
    let r = estimate_r(&cfg(g, x), 50.0, 40_000).unwrap();
    let exact = 1.0 - (-x * (12.0f64).sqrt()).exp();
    assert!(r.covers(exact, 3.0), "{} vs {exact}", r.mean);
}

#[test]
fn far_start_is_almost_surely_safe() {
    let c = cfg(binary(), 50.0).with_horizon(200.0);
    let b = bbmlab::bbm::estimate_p(&c, 2_000).unwrap();
    assert!(b.lower.mean >= 0.99 && b.upper.mean >= 0.99, "{b:?}");
}

#[test]
fn zero_functional_reproduces_r() {
    // With f = 0 the product is the indicator of "extinct and never frozen".
    let c = cfg(binary(), 1.0);
    let t = 5.0;
    let q = estimate_q(&c, &|_| 0.0, t, 20_000).unwrap();
    let r = estimate_r(&c, t, 20_000).unwrap();
    assert_eq!(q.mean, r.mean);
}

#[test]
fn critical_runs_end_in_extinction_or_hit() {
    let set = run_replicates(&cfg(binary(), 2.0), 5_000).unwrap();
    assert!(set
        .outcomes
        .iter()
        .all(|o| matches!(o.tag, OutcomeTag::ExtinctNoHit | OutcomeTag::HitBarrier)));
}

#[test]
fn bridge_correction_reduces_step_dependence() {
    let t = 10.0;
    let n = 20_000;
    let s_at = |dt: f64, bridge: bool| {
        let mut c = cfg(binary(), 1.0).with_dt(dt);
        c.bridge_correction = bridge;
        estimate_s(&c, t, n).unwrap().mean
    };
    let dt = 1e-2;
    let with = (s_at(dt, true) - s_at(dt / 4.0, true)).abs();
    let without = (s_at(dt, false) - s_at(dt / 4.0, false)).abs();
    assert!(with < without, "with bridge {with}, without {without}");
}

#[test]
fn shooting_and_pde_agree() {
    let grid = Grid1D::with_spacing(40.0, 0.02).unwrap();
    for coeffs in [vec![0.5, 0.0, 0.5], vec![0.75, 0.0, 0.25]] {
        let g = OffspringPolynomial::new(coeffs.clone()).unwrap();
        let ode = shoot(6.0, &g, 40.0, 1e-4).unwrap();
        assert!(ode.converged, "{coeffs:?}");
        let pde = steady_state(
            &EvolveSpec::s_type(6.0, g, 0.01, Scheme::SemiImplicitCN),
            grid,
            1e-8,
            3000.0,
        )
        .unwrap();
        let worst = (0..=1000)
            .map(|i| i as f64 * 0.02)
            .map(|x| (ode.profile.interpolate(x) - pde.field.interpolate(x)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{coeffs:?}: {worst}");
    }
}

#[test]
fn supercritical_shooting_needs_the_extinction_target() {
    let g = OffspringPolynomial::new(vec![0.25, 0.0, 0.75]).unwrap();
    let q = g.extinction().unwrap();
    let default = shoot(6.0, &g, 40.0, 1e-4).unwrap();
    assert!(!default.converged);

    let mut opts = ShootOptions::new(40.0, 1e-6);
    opts.target = q;
    let r = shoot_with(6.0, &g, &opts).unwrap();
    assert!(r.converged);
    let pde = steady_state(
        &EvolveSpec::r_type(6.0, g, 0.01, Scheme::SemiImplicitCN),
        Grid1D::with_spacing(40.0, 0.02).unwrap(),
        1e-8,
        500.0,
    )
    .unwrap();
    let worst = (0..=1000)
        .map(|i| i as f64 * 0.02)
        .map(|x| (r.profile.interpolate(x) - pde.field.interpolate(x)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn supercritical_steady_states_differ_near_the_far_boundary() {
    let g = OffspringPolynomial::new(vec![0.25, 0.0, 0.75]).unwrap();
    let grid = Grid1D::with_spacing(40.0, 0.02).unwrap();
    let r = steady_state(
        &EvolveSpec::r_type(6.0, g.clone(), 0.01, Scheme::SemiImplicitCN),
        grid,
        1e-8,
        500.0,
    )
    .unwrap();
    let s = steady_state(
        &EvolveSpec::s_type(6.0, g, 0.01, Scheme::SemiImplicitCN),
        grid,
        1e-8,
        500.0,
    )
    .unwrap();
    assert!(r.field.sup_distance_within(&s.field, 40.0) >= 0.01);
}

#[test]
fn neumann_far_field_is_insensitive_to_domain_length() {
    let steady = |length: f64| {
        steady_state(
            &EvolveSpec::r_type(6.0, binary(), 0.01, Scheme::SemiImplicitCN),
            Grid1D::with_spacing(length, 0.02).unwrap(),
            1e-8,
            3000.0,
        )
        .unwrap()
        .field
    };
    let short = steady(40.0);
    let long = steady(80.0);
    // The critical profile approaches 1 only algebraically, so moving the far
    // wall still shifts [0, 20] slightly; the shift is far below the deficit
    // 1 - u(20) itself.
    let d = short.sup_distance_within(&long, 20.0);
    let deficit = 1.0 - closed_form(6.0, 20.0);
    assert!(d < 0.05 * deficit, "{d} vs deficit {deficit}");
}

#[test]
fn explicit_and_crank_nicolson_steady_states_agree() {
    let grid = Grid1D::with_spacing(10.0, 0.05).unwrap();
    let tol = 1e-8;
    let explicit = EvolveSpec::r_type(6.0, binary(), 1.0, Scheme::ExplicitEuler);
    let explicit = EvolveSpec {
        dt: explicit.explicit_step_bound(&grid),
        ..explicit
    };
    let cn = EvolveSpec::r_type(6.0, binary(), 0.01, Scheme::SemiImplicitCN);
    let a = steady_state(&explicit, grid, tol, 5000.0).unwrap();
    let b = steady_state(&cn, grid, tol, 5000.0).unwrap();
    assert!(a.converged && b.converged);
    let d = a.field.sup_distance_within(&b.field, 10.0);
    assert!(d <= 10.0 * tol, "{d}");
}

#[test]
fn r_and_s_bracket_closed_form_from_below_and_above() {
    let grid = Grid1D::with_spacing(40.0, 0.02).unwrap();
    let cf = Field::from_fn(grid, |x| closed_form(6.0, x));
    for t in [1.0, 5.0, 20.0] {
        let r = evolve(
            &EvolveSpec::r_type(6.0, binary(), 0.01, Scheme::SemiImplicitCN),
            grid,
            t,
        )
        .unwrap();
        let s = evolve(
            &EvolveSpec::s_type(6.0, binary(), 0.01, Scheme::SemiImplicitCN),
            grid,
            t,
        )
        .unwrap();
        let last = grid.last_index_within(20.0);
        for i in 0..=last {
            assert!(r.values[i] <= cf.values[i] + 1e-4, "t={t} i={i}");
            assert!(s.values[i] >= cf.values[i] - 1e-4, "t={t} i={i}");
        }
    }
}
