//! TOML experiment configuration, validated against the solver preconditions
//! at parse time.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use logbump::grid::{CoefficientSpec, PeriodicGrid};
use logbump::{Error as CoreError, GlueSpec, MultibumpOptions, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GaussonCheck,
    Ground,
    Blimit,
    Multibump,
    Decompose,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Self::GaussonCheck,
        Self::Ground,
        Self::Blimit,
        Self::Multibump,
        Self::Decompose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GaussonCheck => "gausson-check",
            Self::Ground => "ground",
            Self::Blimit => "blimit",
            Self::Multibump => "multibump",
            Self::Decompose => "decompose",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// Half-width `L`; required except for `blimit`.
    pub halfwidth: Option<usize>,
    /// Half-widths swept by `blimit`.
    pub halfwidths: Option<Vec<usize>>,
    pub points_per_unit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueSection {
    pub radius: f64,
    /// Physical coordinates, one list of `dim` numbers per center.
    pub centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSection {
    /// Binary field file; the first field is decomposed.
    pub input: PathBuf,
    pub radius: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Number of centers the run must recover, if given.
    pub expect_centers: Option<usize>,
}

fn default_threshold() -> f64 {
    logbump::analysis::DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Sup-norm and level tolerance against the Gausson.
    pub gausson_tol: f64,
    /// Noise allowed in the Cauchy trend of a `blimit` table.
    pub blimit_noise: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            gausson_tol: 5e-3,
            blimit_noise: 1e-6,
        }
    }
}

/// The file as written; [`ExperimentConfig`] is the validated form.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Experiment>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    q: Option<f64>,
    grid: GridSection,
    coefficients: CoefficientSpec,
    #[serde(default)]
    solver: SolverOptions,
    glue: Option<GlueSection>,
    #[serde(default)]
    multibump: MultibumpOptions,
    decompose: Option<DecomposeSection>,
    #[serde(default)]
    checks: Checks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: PathBuf,
    pub q: f64,
    pub grid: GridSection,
    pub coefficients: CoefficientSpec,
    pub solver: SolverOptions,
    pub glue: Option<GlueSection>,
    pub multibump: MultibumpOptions,
    pub decompose: Option<DecomposeSection>,
    pub checks: Checks,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses and validates a configuration. `experiment` (from the command
/// line) takes the place of the `experiment` key and must agree with it when
/// both are present.
pub fn parse_config(
    text: &str,
    experiment: Option<Experiment>,
) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| invalid(e.message().to_string()))?;
    let experiment = match (experiment, raw.experiment) {
        (Some(a), Some(b)) if a != b => {
            return Err(invalid(format!(
                "config is for experiment {b} but {a} was requested"
            )));
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(invalid("no experiment given")),
    };
    let mut cfg = ExperimentConfig {
        experiment,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
        q: raw.q.unwrap_or(4.0),
        grid: raw.grid,
        coefficients: raw.coefficients,
        solver: raw.solver,
        glue: raw.glue,
        multibump: raw.multibump,
        decompose: raw.decompose,
        checks: raw.checks,
    };
    cfg.multibump.calibration.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Grids the experiment runs on: every swept half-width for `blimit`,
    /// otherwise the single `grid.halfwidth`.
    pub fn grids(&self) -> Result<Vec<PeriodicGrid>, CliError> {
        let g = &self.grid;
        let ls = match self.experiment {
            Experiment::Blimit => g
                .halfwidths
                .clone()
                .filter(|l| !l.is_empty())
                .ok_or_else(|| invalid("blimit needs a non-empty grid.halfwidths list"))?,
            _ => vec![g
                .halfwidth
                .ok_or_else(|| invalid("grid.halfwidth is required"))?],
        };
        ls.into_iter()
            .map(|l| {
                PeriodicGrid::new(g.dim, l, g.points_per_unit)
                    .map_err(|e| invalid(format!("grid: {e}")))
            })
            .collect()
    }

    pub fn glue_spec(&self, grid: &PeriodicGrid) -> Result<GlueSpec, CliError> {
        let glue = self
            .glue
            .as_ref()
            .ok_or_else(|| invalid("multibump needs a [glue] section"))?;
        if let Some(c) = glue.centers.iter().find(|c| c.len() != grid.dim()) {
            return Err(invalid(format!(
                "glue center {c:?} must have {} coordinates",
                grid.dim()
            )));
        }
        if glue.centers.len() < 2 {
            return Err(invalid("glue.centers needs at least two centers"));
        }
        let spec = GlueSpec::new(grid, glue.radius, &glue.centers).map_err(|e| match e {
            CoreError::Separation { i, j, distance, required } => invalid(format!(
                "glue centers {i} and {j} are {distance} apart on the torus; separation must be at least 5R = {required}"
            )),
            other => invalid(format!("glue: {other}")),
        })?;
        if !self.coefficients.is_constant() {
            let m = grid.points_per_unit() as i64;
            if spec
                .centers
                .iter()
                .any(|c| c[..grid.dim()].iter().any(|x| x % m != 0))
            {
                return Err(invalid(
                    "glue centers must be integer points: periodic coefficients are only invariant under integer shifts",
                ));
            }
        }
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        let grids = self.grids()?;
        self.coefficients
            .validate()
            .map_err(|e| invalid(format!("coefficients: {e}")))?;
        if self.coefficients.min_v() <= 0.0 {
            return Err(invalid(format!(
                "coefficients: min V = {} must be positive for the energy norm",
                self.coefficients.min_v()
            )));
        }
        self.solver
            .validate()
            .map_err(|e| invalid(format!("solver: {e}")))?;
        let upper = if self.grid.dim >= 3 {
            2.0 * self.grid.dim as f64 / (self.grid.dim as f64 - 2.0)
        } else {
            f64::INFINITY
        };
        if !(self.q > 2.0 && self.q < upper) {
            return Err(invalid(format!("q = {} must lie in (2, {upper})", self.q)));
        }
        let checks = [
            ("gausson_tol", self.checks.gausson_tol),
            ("blimit_noise", self.checks.blimit_noise),
        ];
        if let Some((name, v)) = checks.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid(format!("checks.{name} must be positive, got {v}")));
        }
        match self.experiment {
            Experiment::GaussonCheck if !self.coefficients.is_constant() => {
                return Err(invalid(
                    "gausson-check needs constant coefficients (the Gausson is exact only there)",
                ));
            }
            Experiment::Multibump => {
                self.glue_spec(&grids[0])?;
                if let Some(r0) = self.multibump.r0 {
                    if !(r0 > 0.0 && r0 <= 1.0) {
                        return Err(invalid(format!("multibump.r0 = {r0} must lie in (0, 1]")));
                    }
                }
                if !(self.multibump.window_frac > 0.0 && self.multibump.window_frac.is_finite()) {
                    return Err(invalid("multibump.window_frac must be positive"));
                }
            }
            Experiment::Decompose => {
                let d = self
                    .decompose
                    .as_ref()
                    .ok_or_else(|| invalid("decompose needs a [decompose] section"))?;
                if !(d.radius >= 1.0) {
                    return Err(invalid(format!(
                        "decompose.radius = {} must be at least 1",
                        d.radius
                    )));
                }
                if !(d.threshold > 0.0 && d.threshold.is_finite()) {
                    return Err(invalid(format!(
                        "decompose.threshold = {} must be positive",
                        d.threshold
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
