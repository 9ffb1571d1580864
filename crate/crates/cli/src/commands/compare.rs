//! The three routes side by side.
//!
//! Checks, each against a config tolerance:
//! - `mc_sandwich`: the PDE value lies in `[r̂ - kσ, ŝ + kσ]` at each point;
//! - `pde_r_vs_s`: the two steady states agree on the whole domain;
//! - `pde_vs_closed_form`: both steady states match the closed form (binary
//!   law only);
//! - `ode_converged` and `ode_vs_pde`: the shooting profile settled and
//!   matches the s-type steady state.

use std::process::ExitCode;

use bbmlab::bbm::run_replicates;
use bbmlab::stationary::closed_form;
use serde::Serialize;
use serde_json::json;

use super::meta;
use super::profiles::{shoot, steady};
use super::simulate::sim_config;
use crate::config::ExperimentConfig;
use crate::emit::{summary, Artifact, Table};
use crate::error::CliError;

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<f64>,
    value: f64,
    tolerance: f64,
    passed: bool,
}

impl Check {
    fn new(name: &'static str, x: Option<f64>, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            x,
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
struct Row {
    x: f64,
    horizon: f64,
    p_lower: f64,
    p_lower_sigma: f64,
    p_upper: f64,
    p_upper_sigma: f64,
    capped: usize,
    u_pde_r: f64,
    u_pde_s: f64,
    u_ode: f64,
    u_closed_form: Option<f64>,
    discrepancy: f64,
}

pub fn compare(cfg: &ExperimentConfig) -> Result<ExitCode, CliError> {
    cfg.check_query_points()?;
    let tol = &cfg.compare;
    let mut table = Table::new([
        "x",
        "p_lower",
        "p_upper",
        "u_pde_r",
        "u_pde_s",
        "u_ode",
        "u_closed_form",
    ]);

    if cfg.query_points.is_empty() {
        let meta = meta(
            "compare",
            cfg,
            json!({ "checks": [], "max_discrepancy": 0.0 }),
        );
        let artifact = Artifact::from_table(meta, json!({ "rows": [], "checks": [] }), &table);
        artifact.write(cfg.format, cfg.output_path.as_deref())?;
        summary("compare: no query points", cfg.output_path.as_deref());
        return Ok(ExitCode::SUCCESS);
    }
    if cfg.sim.n_reps == 0 {
        return Err(CliError::Input("sim.n_reps must be at least 1".into()));
    }

    let binary = cfg.is_binary();
    let (r_field, _) = steady(cfg, false)?;
    let (s_field, _) = steady(cfg, true)?;
    let ode = shoot(cfg)?;

    let mut checks = vec![
        Check::new(
            "pde_r_vs_s",
            None,
            r_field.sup_distance_within(&s_field, cfg.grid.length),
            tol.pde_tol,
        ),
        Check {
            name: "ode_converged",
            x: None,
            value: if ode.converged { 0.0 } else { 1.0 },
            tolerance: 0.0,
            passed: ode.converged,
        },
    ];

    let mut rows = Vec::new();
    for (i, q) in cfg.query_points.iter().enumerate() {
        let x = q.x;
        let horizon = q.t.or(cfg.sim.horizon).ok_or_else(|| {
            CliError::Input("compare needs a finite sim.horizon or per-point times".into())
        })?;
        let (u_r, u_s, u_ode) = (
            r_field.interpolate(x),
            s_field.interpolate(x),
            ode.profile.interpolate(x),
        );
        let u_cf = binary.then(|| closed_form(cfg.model.lambda, x));

        // p(0) = 0 exactly; the simulation needs a positive start.
        let (lower, upper, capped) = if x == 0.0 {
            (None, None, 0)
        } else {
            let set = run_replicates(&sim_config(cfg, x, Some(horizon), i)?, cfg.sim.n_reps)?;
            let b = set.p_bounds()?;
            (Some(b.lower), Some(b.upper), set.tag_counts().cap_exceeded)
        };
        let p_lower = lower.map_or(0.0, |e| e.mean);
        let p_upper = upper.map_or(0.0, |e| e.mean);
        let sig_l = lower.map_or(0.0, |e| e.sigma());
        let sig_u = upper.map_or(0.0, |e| e.sigma());

        // Outside [r̂ - kσ, ŝ + kσ] by this much (0 when inside).
        let k = tol.mc_sigmas;
        let outside = (p_lower - k * sig_l - u_s)
            .max(u_s - (p_upper + k * sig_u))
            .max(0.0);
        checks.push(Check::new("mc_sandwich", Some(x), outside, 0.0));
        if let Some(cf) = u_cf {
            checks.push(Check::new(
                "pde_vs_closed_form",
                Some(x),
                (u_r - cf).abs().max((u_s - cf).abs()),
                tol.pde_tol,
            ));
        }
        checks.push(Check::new(
            "ode_vs_pde",
            Some(x),
            (u_ode - u_s).abs(),
            tol.ode_tol,
        ));

        let values = [
            Some(p_lower),
            Some(p_upper),
            Some(u_r),
            Some(u_s),
            Some(u_ode),
            u_cf,
        ];
        let present = values.iter().flatten();
        let hi = present.clone().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = present.copied().fold(f64::INFINITY, f64::min);
        table.push(std::iter::once(Some(x)).chain(values).collect());
        rows.push(Row {
            x,
            horizon,
            p_lower,
            p_lower_sigma: sig_l,
            p_upper,
            p_upper_sigma: sig_u,
            capped,
            u_pde_r: u_r,
            u_pde_s: u_s,
            u_ode,
            u_closed_form: u_cf,
            discrepancy: hi - lo,
        });
    }

    let max_discrepancy = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| match c.x {
            Some(x) => format!("{}@x={x} ({:.3e} > {:.1e})", c.name, c.value, c.tolerance),
            None => format!("{} ({:.3e} > {:.1e})", c.name, c.value, c.tolerance),
        })
        .collect();

    let meta = meta(
        "compare",
        cfg,
        json!({
            "max_discrepancy": max_discrepancy,
            "agree": failed.is_empty(),
            "ode_slope0": ode.slope0,
        }),
    );
    let data = json!({ "rows": rows, "checks": checks });
    let artifact = Artifact::from_table(meta, data, &table);
    artifact.write(cfg.format, cfg.output_path.as_deref())?;

    let verdict = if failed.is_empty() {
        "all checks passed".to_owned()
    } else {
        format!("DISAGREEMENT: {}", failed.join("; "))
    };
    summary(
        &format!(
            "compare: {} points, max discrepancy {:.3e}, {verdict}",
            rows.len(),
            max_discrepancy
        ),
        cfg.output_path.as_deref(),
    );
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
