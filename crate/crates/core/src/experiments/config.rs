//! The structured text config of an experiment and its resolution into
//! model objects.

use std::path::{Path, PathBuf};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::concentration::Centering;
use crate::environment::{Environment, Marginal, PotentialKind, PotentialSpec, RwreKernel};
use crate::error::{Error, Result};
use crate::geometry::{StepGeometry, Velocity};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Global seed: environment seed when the environment block has none,
    /// and the root of every per-sample seed.
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub dim: usize,
    pub steps: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Iid {
        marginal: Marginal,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Periodic {
        period: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<Vec<f64>>,
        /// CSV file of values, read row by row; relative to the config file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table_csv: Option<PathBuf>,
    },
    Constant {
        value: f64,
    },
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKindName {
    #[default]
    Site,
    Zero,
    Step,
    Stretched,
    Rwre,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default)]
    pub kind: PotentialKindName,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub memory_ell: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<RwreKernel>,
}

fn one() -> f64 {
    1.0
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            kind: PotentialKindName::Site,
            beta: 1.0,
            memory_ell: 0,
            h: None,
            coeffs: None,
            offsets: None,
            kernel: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Geometry,
    Dp,
    Duality,
    Rate,
    L2,
    Entropy,
    Concentration,
    Continuity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    Line,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltSourceName {
    Perron,
    Estimate,
}

/// Kind plus every kind-specific knob. Unset knobs get per-kind defaults
/// during resolution, so the resolved block is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_schedule: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetName>,
    /// Velocity, comma separated; fractions and decimals are exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<String>,
    /// Explicit velocities for rate tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zetas: Option<Vec<String>>,
    /// Convex representation coefficients, one per step, as exact strings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_source: Option<TiltSourceName>,
    /// Resolution `k` of the barycentric velocity grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Length of the martingale runs of the L2 experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centering: Option<Centering>,
    /// Duality gap required of the entropy solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    /// Tolerance of the run's cross-checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl ExperimentBlock {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentBlock {
            kind,
            n_schedule: None,
            target: None,
            zeta: None,
            zetas: None,
            representation: None,
            tilt_radius: None,
            tilt_step: None,
            tilt_source: None,
            zeta_grid: None,
            samples: None,
            n: None,
            w_samples: None,
            epsilon: None,
            centering: None,
            gap: None,
            truncation: None,
            tolerance: None,
            prune: None,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), prefix: None }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads a config; relative `table_csv` paths are taken from the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let EnvironmentConfig::Periodic { table_csv: Some(p), .. } = &mut cfg.environment {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn geometry(&self) -> Result<StepGeometry> {
        let g = &self.geometry;
        match &g.weights {
            Some(w) => StepGeometry::new(g.dim, g.steps.clone(), w.clone()),
            None => StepGeometry::uniform(g.dim, g.steps.clone()),
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        match &self.environment {
            EnvironmentConfig::Iid { marginal, seed } => Environment::iid(marginal.clone(), seed.unwrap_or(self.seed)),
            EnvironmentConfig::Constant { value } => Ok(Environment::constant(*value)),
            EnvironmentConfig::Periodic { period, table, table_csv } => {
                let values = match (table, table_csv) {
                    (Some(t), None) => t.clone(),
                    (None, Some(p)) => read_table_csv(p)?,
                    _ => return Err(Error::Config("periodic environment needs exactly one of table, table_csv".into())),
                };
                Environment::periodic(period.clone(), values)
            }
        }
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        let p = &self.potential;
        let need = |v: &Option<Vec<f64>>, name: &str| {
            v.clone().ok_or_else(|| Error::Config(format!("potential kind {:?} needs `{name}`", p.kind)))
        };
        let kind = match p.kind {
            PotentialKindName::Site => PotentialKind::Site,
            PotentialKindName::Zero => return Ok(PotentialSpec::zero().with_ell(p.memory_ell)),
            PotentialKindName::Step => PotentialKind::Step {
                coeffs: need(&p.coeffs, "coeffs")?,
                offsets: p.offsets.clone().unwrap_or_else(|| vec![0.0; self.geometry.steps.len()]),
            },
            PotentialKindName::Stretched => PotentialKind::Stretched { h: need(&p.h, "h")? },
            PotentialKindName::Rwre => PotentialKind::Rwre(
                p.kernel.clone().ok_or_else(|| Error::Config("potential kind rwre needs `kernel`".into()))?,
            ),
            PotentialKindName::Window => {
                let coeffs = need(&p.coeffs, "coeffs")?;
                let offsets = p.offsets.clone().unwrap_or_else(|| vec![0.0; coeffs.len()]);
                PotentialKind::Window { coeffs, offsets }
            }
        };
        let ell = match p.kind {
            PotentialKindName::Rwre => p.memory_ell.max(1),
            _ => p.memory_ell,
        };
        Ok(PotentialSpec { kind, ell, beta: p.beta })
    }

    /// All three model objects, validated against each other.
    pub fn model(&self) -> Result<(StepGeometry, Environment, PotentialSpec)> {
        let geom = self.geometry()?;
        let env = self.environment()?;
        let spec = self.potential()?;
        if self.experiment.kind != ExperimentKind::Geometry {
            spec.validate(&geom, &env)?;
        }
        Ok((geom, env, spec))
    }

    /// The config with every default made explicit: the environment seed,
    /// an inlined CSV table and the per-kind experiment knobs.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        match &mut out.environment {
            EnvironmentConfig::Iid { seed, .. } => {
                seed.get_or_insert(self.seed);
            }
            EnvironmentConfig::Periodic { table, table_csv, .. } => {
                if let Some(p) = table_csv.take() {
                    *table = Some(read_table_csv(&p)?);
                }
            }
            EnvironmentConfig::Constant { .. } => {}
        }
        let periodic = matches!(out.environment, EnvironmentConfig::Periodic { .. });
        let geom = self.geometry()?;
        let e = &mut out.experiment;
        use ExperimentKind as K;
        match e.kind {
            K::Geometry => {}
            K::Dp => {
                e.n_schedule.get_or_insert_with(|| vec![25, 50, 100, 200]);
                e.target.get_or_insert(if e.zeta.is_some() { TargetName::Point } else { TargetName::Line });
            }
            K::Duality | K::Rate => {
                e.n_schedule.get_or_insert_with(|| vec![25, 50, 100, 200]);
                e.tilt_radius.get_or_insert(3.0);
                e.tilt_step.get_or_insert(0.15);
                e.tilt_source
                    .get_or_insert(if periodic { TiltSourceName::Perron } else { TiltSourceName::Estimate });
                if e.zetas.is_none() {
                    e.zeta_grid.get_or_insert(8);
                }
                e.tolerance.get_or_insert(2e-2);
            }
            K::L2 => {
                e.n_schedule.get_or_insert_with(|| vec![12, 24, 36, 48]);
                e.zeta.get_or_insert_with(|| velocity_string(&mean_velocity(&geom)));
                e.samples.get_or_insert(20);
                e.n.get_or_insert(100);
                e.w_samples.get_or_insert(0);
                e.tolerance.get_or_insert(5e-2);
            }
            K::Entropy => {
                e.gap.get_or_insert(1e-6);
                e.tolerance.get_or_insert(1e-3);
            }
            K::Concentration => {
                e.n_schedule.get_or_insert_with(|| (1..=8).map(|i| 50 * i).collect());
                e.zeta.get_or_insert_with(|| velocity_string(&mean_velocity(&geom)));
                e.epsilon.get_or_insert(0.1);
                e.samples.get_or_insert(500);
                e.centering.get_or_insert(Centering::EmpiricalMean);
            }
            K::Continuity => {
                e.n_schedule.get_or_insert_with(|| vec![25, 50, 100, 200]);
                e.zeta_grid.get_or_insert(8);
            }
        }
        out.output.prefix.get_or_insert_with(|| kind_name(e.kind).to_string());
        Ok(out)
    }
}

pub fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Geometry => "geometry",
        ExperimentKind::Dp => "dp",
        ExperimentKind::Duality => "duality",
        ExperimentKind::Rate => "rate",
        ExperimentKind::L2 => "l2",
        ExperimentKind::Entropy => "entropy",
        ExperimentKind::Concentration => "concentration",
        ExperimentKind::Continuity => "continuity",
    }
}

/// `Σ p̂_z z`, exact when the kernel is uniform.
pub fn mean_velocity(geom: &StepGeometry) -> Velocity {
    let w = geom.weights();
    if w.iter().all(|&x| x == w[0]) {
        let k = geom.num_steps() as i64;
        let parts: Vec<BigRational> = (0..geom.dim())
            .map(|i| BigRational::new(geom.steps().iter().map(|z| z[i]).sum::<i64>().into(), k.into()))
            .collect();
        Velocity::Exact(parts)
    } else {
        Velocity::Real(geom.mean_velocity())
    }
}

/// The comma separated form accepted by `Velocity::from_str`.
pub fn velocity_string(v: &Velocity) -> String {
    v.to_string().trim_start_matches('(').trim_end_matches(')').to_string()
}

fn read_table_csv(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        for field in rec?.iter().filter(|f| !f.is_empty()) {
            out.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("{}: bad value '{field}': {e}", path.display())))?,
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[geometry]
dim = 2
steps = [[0, 1], [1, 1]]

[environment]
kind = "iid"
marginal = { kind = "bernoulli", p = 0.5, low = -1.0, high = 1.0 }

[potential]
kind = "site"
beta = 3.0

[experiment]
kind = "concentration"
zeta = "1/2, 1"
"#;

    #[test]
    fn parses_and_resolves_defaults() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let r = cfg.resolved().unwrap();
        assert_eq!(r.experiment.samples, Some(500));
        assert_eq!(r.experiment.n_schedule.as_ref().unwrap().len(), 8);
        assert!(matches!(r.environment, EnvironmentConfig::Iid { seed: Some(7), .. }));
        assert_eq!(r.output.prefix.as_deref(), Some("concentration"));
        let (g, _, spec) = r.model().unwrap();
        assert_eq!(g.num_steps(), 2);
        assert_eq!(spec.beta, 3.0);
    }

    #[test]
    fn resolved_config_round_trips() {
        let r = ExperimentConfig::from_toml(SAMPLE).unwrap().resolved().unwrap();
        let back = ExperimentConfig::from_toml(&r.to_toml().unwrap()).unwrap();
        assert_eq!(back, r);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), r);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("beta = 3.0", "beta = 3.0\ntemperature = 1.0");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = SAMPLE.replace("seed = 7", "seed = 7\nschema_version = 9");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn periodic_table_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.csv"), "0.0, 1.0\n-0.5,2\n").unwrap();
        let text = "[geometry]\ndim = 2\nsteps = [[1, 0], [0, 1]]\n\
                    [environment]\nkind = \"periodic\"\nperiod = [2, 2]\ntable_csv = \"t.csv\"\n\
                    [experiment]\nkind = \"dp\"\n";
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let r = cfg.resolved().unwrap();
        match &r.environment {
            EnvironmentConfig::Periodic { table, table_csv, .. } => {
                assert_eq!(table.as_deref(), Some(&[0.0, 1.0, -0.5, 2.0][..]));
                assert!(table_csv.is_none());
            }
            _ => unreachable!(),
        }
        assert_eq!(r.experiment.target, Some(TargetName::Line));
    }
}
