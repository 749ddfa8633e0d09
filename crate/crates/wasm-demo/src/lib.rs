//! Three browser operations over `rwrp-core`, each taking plain strings and
//! returning a JSON document. Errors come back as strings.

use rwrp_core::experiments::config::{
    EnvironmentConfig, GeometryConfig, OutputConfig, PotentialConfig, TargetName, TiltSourceName,
};
use rwrp_core::experiments::{run, ExperimentBlock, ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use rwrp_core::environment::Marginal;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn numbers<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    s.split([',', ' '])
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| format!("bad {what} value '{p}'")))
        .collect()
}

/// `"1,0; 0,1"` into step vectors.
fn steps(s: &str) -> Result<Vec<Vec<i64>>, String> {
    let out: Vec<Vec<i64>> =
        s.split(';').filter(|z| !z.trim().is_empty()).map(|z| numbers(z, "step")).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("no steps given".into());
    }
    Ok(out)
}

fn config(step_text: &str, environment: EnvironmentConfig, beta: f64, experiment: ExperimentBlock) -> Result<ExperimentConfig, String> {
    let steps = steps(step_text)?;
    Ok(ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        seed: 0,
        geometry: GeometryConfig { dim: steps[0].len(), steps, weights: None },
        environment,
        potential: PotentialConfig { beta, ..Default::default() },
        experiment,
        output: OutputConfig::default(),
    })
}

fn execute(cfg: &ExperimentConfig) -> Result<String, String> {
    let out = run(cfg).map_err(|e| e.to_string())?;
    let table = out.table.as_ref().map(|t| json!({ "headers": t.headers, "rows": t.rows }));
    Ok(json!({ "metrics": out.metrics, "checks": out.checks, "table": table }).to_string())
}

/// Hull, faces, extreme points and directedness of a step set.
#[wasm_bindgen]
pub fn describe(step_text: &str) -> Result<String, String> {
    let cfg = config(step_text, EnvironmentConfig::default(), 0.0, ExperimentBlock::new(ExperimentKind::Geometry))?;
    Ok(cfg.geometry().map_err(|e| e.to_string())?.describe().to_string())
}

/// `F_n / n` over a schedule for an i.i.d. `±1` (`bernoulli`) or standard
/// normal (`gaussian`) environment; point-to-point when `zeta` is nonempty.
#[wasm_bindgen]
pub fn free_energy(step_text: &str, marginal: &str, beta: f64, seed: u64, schedule: &str, zeta: &str) -> Result<String, String> {
    let marginal = match marginal {
        "bernoulli" => Marginal::Bernoulli { p: 0.5, low: -1.0, high: 1.0 },
        "gaussian" => Marginal::Gaussian { mean: 0.0, std_dev: 1.0 },
        other => return Err(format!("unknown marginal '{other}'")),
    };
    let mut block = ExperimentBlock::new(ExperimentKind::Dp);
    block.n_schedule = Some(numbers(schedule, "n")?);
    if !zeta.trim().is_empty() {
        block.zeta = Some(zeta.to_string());
        block.target = Some(TargetName::Point);
    }
    // keeps a careless schedule from freezing the tab
    block.budget = Some(4.0e6);
    execute(&config(step_text, EnvironmentConfig::Iid { marginal, seed: Some(seed) }, beta, block)?)
}

/// Rate function `I(ζ)` on a velocity grid of resolution `k` for a
/// periodic environment, from Perron roots of the tilted transfer operator.
#[wasm_bindgen]
pub fn rate_table(step_text: &str, period: &str, table: &str, beta: f64, k: usize) -> Result<String, String> {
    let environment = EnvironmentConfig::Periodic {
        period: numbers(period, "period")?,
        table: Some(numbers(table, "table")?),
        table_csv: None,
    };
    let mut block = ExperimentBlock::new(ExperimentKind::Rate);
    block.zeta_grid = Some(k.clamp(1, 64));
    block.tilt_source = Some(TiltSourceName::Perron);
    execute(&config(step_text, environment, beta, block)?)
}
