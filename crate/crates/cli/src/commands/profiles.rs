use std::process::ExitCode;

use bbmlab::output::profiles_csv;
use bbmlab::pde::{evolve_snapshots, steady_state, EvolveSpec, Field, InitialCondition};
use bbmlab::stationary::{closed_form, shoot_with, ClosedForm, ShootOptions, ShootingResult};
use serde_json::{json, Value};

use super::meta;
use crate::config::ExperimentConfig;
use crate::emit::{summary, Artifact};
use crate::error::CliError;

fn spec(cfg: &ExperimentConfig, unit_start: bool) -> Result<EvolveSpec, CliError> {
    let (lambda, g) = (cfg.lambda()?, cfg.offspring()?);
    let scheme = cfg.pde.scheme.into();
    Ok(if unit_start {
        EvolveSpec::s_type(lambda, g, cfg.pde.dt, scheme)
    } else {
        EvolveSpec::r_type(lambda, g, cfg.pde.dt, scheme)
    })
}

fn ic_name(spec: &EvolveSpec) -> &'static str {
    match spec.ic {
        InitialCondition::Zero => "r",
        _ => "s",
    }
}

/// Steady state from one initial condition; not settling by `t_max` is a
/// numerical failure.
pub(super) fn steady(cfg: &ExperimentConfig, unit_start: bool) -> Result<(Field, f64), CliError> {
    let spec = spec(cfg, unit_start)?;
    let grid = cfg.grid()?;
    let st = steady_state(&spec, grid, cfg.pde.steady_tol, cfg.pde.t_max)?;
    if !st.converged {
        return Err(CliError::Numerical(format!(
            "{}-type PDE run did not reach a steady state (tol {}) by t = {}",
            ic_name(&spec),
            cfg.pde.steady_tol,
            cfg.pde.t_max
        )));
    }
    Ok((st.field, st.t_reached))
}

pub(super) fn shoot(cfg: &ExperimentConfig) -> Result<ShootingResult, CliError> {
    let mut opts = ShootOptions::new(cfg.grid.length, cfg.ode.tol);
    opts.target = cfg.ode.target;
    opts.dx = cfg.grid.dx;
    cfg.grid()?;
    Ok(shoot_with(cfg.lambda()?, &cfg.offspring()?, &opts)?)
}

/// Distance from the closed form on the left half of the domain, away from
/// the artificial far boundary.
fn closed_form_distance(cfg: &ExperimentConfig, f: &Field) -> Option<f64> {
    cfg.is_binary()
        .then(|| f.sup_distance_to(|x| closed_form(cfg.model.lambda, x), cfg.grid.length / 2.0))
}

pub fn solve_pde(cfg: &ExperimentConfig, zero: bool, one: bool) -> Result<ExitCode, CliError> {
    let mut times = cfg.pde.times.clone();
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(CliError::Input(
            "snapshot times must be finite and >= 0".into(),
        ));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut columns: Vec<(String, Field)> = Vec::new();
    let mut runs: Vec<Value> = Vec::new();
    for unit_start in [false, true]
        .into_iter()
        .filter(|&u| if u { one } else { zero })
    {
        let spec = spec(cfg, unit_start)?;
        let name = ic_name(&spec);
        if times.is_empty() {
            let (field, t_reached) = steady(cfg, unit_start)?;
            runs.push(json!({
                "column": name,
                "steady_state": true,
                "t_reached": t_reached,
                "closed_form_distance": closed_form_distance(cfg, &field),
            }));
            columns.push((name.to_owned(), field));
        } else {
            for (t, field) in evolve_snapshots(&spec, cfg.grid()?, &times)? {
                let col = format!("{name}_t{t}");
                runs.push(json!({
                    "column": col,
                    "t": t,
                    "closed_form_distance": closed_form_distance(cfg, &field),
                }));
                columns.push((col, field));
            }
        }
    }

    let meta = meta("solve-pde", cfg, json!({ "runs": runs }));
    let refs: Vec<(&str, &Field)> = columns.iter().map(|(n, f)| (n.as_str(), f)).collect();
    let csv = profiles_csv(&meta, &refs);
    let grid = cfg.grid()?;
    let data = json!({
        "x": grid.xs().collect::<Vec<_>>(),
        "profiles": columns
            .iter()
            .map(|(n, f)| json!({ "name": n, "values": f.values }))
            .collect::<Vec<_>>(),
    });
    Artifact { meta, data, csv }.write(cfg.format, cfg.output_path.as_deref())?;

    let names: Vec<&str> = columns.iter().map(|(n, _)| n.as_str()).collect();
    summary(
        &format!(
            "solve-pde: {} nodes, columns {}",
            grid.nodes(),
            names.join(",")
        ),
        cfg.output_path.as_deref(),
    );
    Ok(ExitCode::SUCCESS)
}

pub fn solve_ode(cfg: &ExperimentConfig) -> Result<ExitCode, CliError> {
    let res = shoot(cfg)?;
    let closed_slope = cfg
        .is_binary()
        .then(|| ClosedForm::new(cfg.model.lambda).slope(0.0));
    let meta = meta(
        "solve-ode",
        cfg,
        json!({
            "slope0": res.slope0,
            "converged": res.converged,
            "target": res.target_value,
            "resolved_to": res.resolved_to,
            "closed_form_slope0": closed_slope,
            "closed_form_distance": closed_form_distance(cfg, &res.profile),
        }),
    );
    let csv = profiles_csv(&meta, &[("u", &res.profile)]);
    let data = json!({
        "x": res.profile.grid.xs().collect::<Vec<_>>(),
        "u": res.profile.values,
    });
    Artifact { meta, data, csv }.write(cfg.format, cfg.output_path.as_deref())?;
    summary(
        &format!(
            "solve-ode: slope0 = {}, converged = {}, resolved to x = {}",
            res.slope0, res.converged, res.resolved_to
        ),
        cfg.output_path.as_deref(),
    );
    if res.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Numerical(format!(
            "shooting did not settle at the far-field target {} (profile written)",
            res.target_value
        )))
    }
}
