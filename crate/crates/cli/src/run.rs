//! The five experiments and their artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use logbump::analysis::{concentration_indicator, decompose_bumps};
use logbump::grid::io::{load_fields, save_csv, save_fields};
use logbump::grid::{sample_coefficients, GridField, PeriodicGrid};
use logbump::solver::{b_of_l, ground_state, solve_multibump};
use logbump::{Coefficients, Field, Report};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the configured output directory.
    pub out: Option<PathBuf>,
    pub dump_csv: bool,
    /// Solve the `blimit` sweep concurrently.
    pub concurrent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    AssertionFailed,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Pass => 0,
            Self::AssertionFailed => 2,
            Self::NotConverged => 4,
        }
    }
}

/// What an experiment produced before it is written to disk.
struct Outcome {
    reports: Value,
    assertions: Vec<Assertion>,
    converged: bool,
    fields: Vec<(String, Field)>,
    tables: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub experiment: Experiment,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub wall_time_s: f64,
    pub status: Status,
    pub assertions: Vec<Assertion>,
    pub reports: Value,
    /// Files written next to the manifest.
    pub artifacts: Vec<String>,
}

fn pair_on(cfg: &ExperimentConfig, grid: &PeriodicGrid) -> Result<Coefficients, CliError> {
    Ok(sample_coefficients(grid, &cfg.coefficients)?)
}

fn solve_summary(name: &str, r: &Report) -> Assertion {
    Assertion::new(
        name,
        r.converged,
        format!(
            "|r| = {:.3e}, identity gap = {:.3e}, min u = {:.3e}",
            r.residual_l2, r.identity_gap, r.positivity_min
        ),
    )
}

fn gausson_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grids()?[0];
    let pair = pair_on(cfg, &grid)?;
    let (v, q) = match cfg.coefficients {
        logbump::CoefficientSpec::Constant { v, q } => (v, q),
        _ => unreachable!("validated at parse time"),
    };
    let n = grid.dim() as f64;
    // u = λ e^{-Q|x|²/2} with log λ = (NQ + V)/(2Q)
    let log_lambda = (n * q + v) / (2.0 * q);
    let level = 0.5 * q * (2.0 * log_lambda).exp() * (std::f64::consts::PI / q).powf(0.5 * n);
    let exact = GridField::from_fn(grid, |x: &[f64]| {
        (log_lambda - 0.5 * q * x.iter().map(|t| t * t).sum::<f64>()).exp()
    });
    let rep = ground_state(&pair, &cfg.solver)?;
    let sup = rep.field.sub(&exact).sup_norm();
    let gap = (rep.energy.total - level).abs();
    let tol = cfg.checks.gausson_tol;
    let assertions = vec![
        solve_summary("converged", &rep),
        Assertion::new(
            "profile",
            sup <= tol,
            format!("sup |u - gausson| = {sup:.3e} (tol {tol:e})"),
        ),
        Assertion::new(
            "level",
            gap <= tol,
            format!("|J - {level:.6}| = {gap:.3e} (tol {tol:e})"),
        ),
    ];
    Ok(Outcome {
        reports: json!({ "ground": rep, "oracle_level": level, "energy_gap": gap, "sup_error": sup }),
        converged: rep.converged,
        fields: vec![
            ("ground".into(), rep.field.clone()),
            ("gausson".into(), exact),
        ],
        assertions,
        tables: vec![],
    })
}

fn ground(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grids()?[0];
    let rep = ground_state(&pair_on(cfg, &grid)?, &cfg.solver)?;
    Ok(Outcome {
        reports: json!({ "ground": rep }),
        assertions: vec![solve_summary("converged", &rep)],
        converged: rep.converged,
        fields: vec![("ground".into(), rep.field.clone())],
        tables: vec![],
    })
}

fn blimit(cfg: &ExperimentConfig, concurrent: bool) -> Result<Outcome, CliError> {
    let grids = cfg.grids()?;
    let pair = pair_on(cfg, &grids[0])?;
    let mut ls: Vec<usize> = grids.iter().map(|g| g.halfwidth()).collect();
    ls.sort_unstable();
    ls.dedup();
    let rows = b_of_l(&pair, &ls, &cfg.solver, concurrent)?;
    let mut csv = String::from("L,b_L\n");
    for r in &rows {
        csv.push_str(&format!("{},{:.17e}\n", r.halfwidth, r.level));
    }
    let converged = rows.iter().all(|r| r.report.converged);
    // successive differences |b_{L'} - b_L| must not grow beyond the noise
    let steps: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].level - w[0].level).abs())
        .collect();
    let noise = cfg.checks.blimit_noise;
    let cauchy = steps.windows(2).all(|w| w[1] <= w[0] + noise);
    let mut assertions: Vec<Assertion> = rows
        .iter()
        .map(|r| solve_summary(&format!("converged L={}", r.halfwidth), &r.report))
        .collect();
    assertions.push(Assertion::new(
        "cauchy trend",
        cauchy,
        format!(
            "successive differences [{}]",
            steps
                .iter()
                .map(|s| format!("{s:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ));
    Ok(Outcome {
        reports: json!({ "rows": rows }),
        assertions,
        converged,
        fields: vec![],
        tables: vec![("blimit.csv".into(), csv)],
    })
}

fn multibump(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let grid = cfg.grids()?[0];
    let pair = pair_on(cfg, &grid)?;
    let spec = cfg.glue_spec(&grid)?;
    let ground = ground_state(&pair, &cfg.solver)?;
    if !ground.converged {
        return Ok(Outcome {
            reports: json!({ "ground": ground }),
            assertions: vec![solve_summary("ground converged", &ground)],
            converged: false,
            fields: vec![("ground".into(), ground.field.clone())],
            tables: vec![],
        });
    }
    let rep = solve_multibump(&spec, &pair, &[&ground.field], &cfg.solver, &cfg.multibump)?;
    let (lo, hi) = rep.level_window;
    let assertions = vec![
        solve_summary("ground converged", &ground),
        solve_summary("converged", &rep.solve),
        Assertion::new(
            "level window",
            rep.in_window,
            format!("J = {:.6} in ({lo:.6}, {hi:.6})", rep.solve.energy.total),
        ),
        Assertion::new(
            "near superposition",
            rep.within_2r,
            format!(
                "‖u - S‖ = {:.3e} vs 2r = {:.3e}; ‖u - Ω‖ = {:.3e}",
                rep.distance_to_superposition,
                2.0 * rep.smallness.r,
                rep.distance_to_glued
            ),
        ),
    ];
    Ok(Outcome {
        converged: rep.solve.converged,
        fields: vec![
            ("multibump".into(), rep.solve.field.clone()),
            ("ground".into(), ground.field.clone()),
        ],
        reports: json!({ "ground": ground, "multibump": rep, "centers": spec.centers }),
        assertions,
        tables: vec![],
    })
}

fn decompose(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let d = cfg.decompose.as_ref().expect("validated at parse time");
    let fields = load_fields(&d.input)?;
    let u = fields
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Config(format!("{:?} holds no fields", d.input)))?;
    let grid = cfg.grids()?[0];
    if *u.grid() != grid {
        return Err(CliError::Config(format!(
            "stored field lives on {:?}, config describes {grid:?}",
            u.grid()
        )));
    }
    let pair = pair_on(cfg, &grid)?;
    let dec = decompose_bumps(&u, &pair, d.radius, d.threshold)?;
    let (indicator, corner) = concentration_indicator(&u, cfg.q)?;
    let mut assertions = vec![];
    if let Some(k) = d.expect_centers {
        assertions.push(Assertion::new(
            "center count",
            dec.centers.len() == k,
            format!("found {} centers, expected {k}", dec.centers.len()),
        ));
    }
    Ok(Outcome {
        reports: json!({ "decomposition": dec, "concentration": { "q": cfg.q, "d": indicator, "corner": corner } }),
        assertions,
        converged: true,
        fields: vec![],
        tables: vec![],
    })
}

/// Runs the experiment and writes the manifest, fields and tables under the
/// output directory.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Manifest, CliError> {
    let out = opts.out.clone().unwrap_or_else(|| cfg.output.clone());
    fs::create_dir_all(&out)?;
    let start = Instant::now();
    let outcome = match cfg.experiment {
        Experiment::GaussonCheck => gausson_check(cfg),
        Experiment::Ground => ground(cfg),
        Experiment::Blimit => blimit(cfg, opts.concurrent),
        Experiment::Multibump => multibump(cfg),
        Experiment::Decompose => decompose(cfg),
    }?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let status = if !outcome.converged {
        Status::NotConverged
    } else if outcome.assertions.iter().all(|a| a.pass) {
        Status::Pass
    } else {
        Status::AssertionFailed
    };
    let artifacts = write_artifacts(&out, &outcome, opts.dump_csv)?;
    let manifest = Manifest {
        experiment: cfg.experiment,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        threads: rayon::current_num_threads(),
        wall_time_s,
        status,
        assertions: outcome.assertions,
        reports: outcome.reports,
        artifacts,
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

fn write_artifacts(out: &Path, outcome: &Outcome, dump_csv: bool) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    if !outcome.fields.is_empty() {
        let refs: Vec<&Field> = outcome.fields.iter().map(|(_, f)| f).collect();
        save_fields(&out.join("fields.bin"), &refs)?;
        written.push("fields.bin".to_string());
        if dump_csv {
            let names: Vec<&str> = outcome.fields.iter().map(|(n, _)| n.as_str()).collect();
            save_csv(&out.join("fields.csv"), &names, &refs)?;
            written.push("fields.csv".to_string());
        }
    }
    for (name, body) in &outcome.tables {
        fs::write(out.join(name), body)?;
        written.push(name.clone());
    }
    Ok(written)
}

/// Machine-readable record of a run that did not pass.
pub fn write_failure(out: &Path, code: i32, kind: &str, message: &str) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let body = json!({ "exit_code": code, "kind": kind, "message": message });
    fs::write(
        out.join("failure.json"),
        serde_json::to_string_pretty(&body)?,
    )?;
    Ok(())
}
