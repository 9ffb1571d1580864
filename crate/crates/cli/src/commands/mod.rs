mod compare;
mod profiles;
mod simulate;

use std::process::ExitCode;

use bbmlab::offspring::{decompose_reaction, ReactionPolynomial};
use bbmlab::OffspringError;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::emit::{trimmed, Artifact, Table};
use crate::error::CliError;

pub use compare::compare;
pub use profiles::{solve_ode, solve_pde};
pub use simulate::simulate;

/// Self-describing header shared by every artifact: the resolved config
/// (minus thread count and destination) is enough to rerun.
fn meta(command: &str, cfg: &ExperimentConfig, extra: Value) -> Value {
    let mut rerun = cfg.clone();
    rerun.sim.threads = None;
    rerun.output_path = None;
    let mut m = json!({
        "tool": "bbmlab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.sim.seed,
        "config": rerun,
    });
    if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
        m.extend(extra);
    }
    m
}

pub enum ClassifyInput {
    /// Use `model.offspring` from the resolved config.
    Offspring,
    Reaction {
        coeffs: Vec<f64>,
        lambda: Option<f64>,
    },
}

pub fn classify(
    cfg: &ExperimentConfig,
    input: ClassifyInput,
    format_given: bool,
) -> Result<ExitCode, CliError> {
    let mut cfg = cfg.clone();
    let mut reaction = Value::Null;
    if let ClassifyInput::Reaction { coeffs, lambda } = input {
        let mut f = ReactionPolynomial::new(coeffs.clone());
        if let Some(l) = lambda {
            f = f.with_lambda(l);
        }
        let (l, g) = decompose_reaction(&f)
            .map_err(|e| CliError::Input(format!("invalid reaction polynomial: {e}")))?;
        cfg.model.lambda = l;
        cfg.model.offspring = g.coeffs().to_vec();
        reaction = json!(coeffs);
    }
    let g = cfg.offspring()?;
    let c = g.classify();
    let q = g.extinction().map_err(|e| match e {
        OffspringError::NoConvergence(_) => CliError::Numerical(e.to_string()),
        _ => CliError::Input(e.to_string()),
    })?;
    let mut line = format!(
        "{}, m={}, q*={}",
        c.regime,
        trimmed(c.mean_offspring, 6),
        trimmed(q, 6)
    );
    if !reaction.is_null() {
        line.push_str(&format!(", lambda={}", trimmed(cfg.model.lambda, 6)));
    }

    let data = json!({
        "regime": c.regime.to_string(),
        "mean_offspring": c.mean_offspring,
        "extinction_probability": q,
        "offspring": g.coeffs(),
        "lambda": if reaction.is_null() { Value::Null } else { json!(cfg.model.lambda) },
        "reaction": reaction,
    });
    let mut table = Table::new(["mean_offspring", "extinction_probability"]);
    table.push(vec![Some(c.mean_offspring), Some(q)]);
    let meta = meta("classify", &cfg, json!({ "regime": c.regime.to_string() }));
    let artifact = Artifact::from_table(meta, data, &table);

    match (&cfg.output_path, format_given && cfg.format == Format::Json) {
        (Some(path), _) => {
            artifact.write(cfg.format, Some(path))?;
            println!("{line}");
        }
        (None, true) => artifact.write(Format::Json, None)?,
        (None, false) => println!("{line}"),
    }
    Ok(ExitCode::SUCCESS)
}
