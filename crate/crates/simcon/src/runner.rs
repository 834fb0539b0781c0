//! Experiment orchestration: a flat key-value configuration resolved
//! from defaults, an optional config file, and command-line overrides
//! (later source wins), executed into a deterministic set of artifact
//! files plus a manifest that reproduces the run byte for byte.
//!
//! Artifacts per experiment (written under the output directory):
//!
//! * every run: `manifest.json`
//! * `profile`: `report.json`, `rx.csv`
//! * `instability`, `theorem`: `report.json`, one `queries_<i>.csv` per
//!   epsilon (columns `query_index,d_x,count_open,count_closed,unstable,
//!   coincident`)
//! * `sweep`: `report.json`, `sweep.csv`
//! * `stable-check`: `report.json`, `unstable.csv`
//! * `alpha`: `report.json`, `curve.csv`
//!
//! CSV files are comma-separated, `.` decimal, LF line endings, UTF-8,
//! with a header row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    dimension_sweep, instability_from_stats, query_stats, stable_workload_check,
    verify_count_bound_from_stats, DatasetSize, QueryStat,
};
use crate::concentration::{concentration_curve, LevyConstants};
use crate::rng::derive_seed;
use crate::space::{Space, SpaceKind};
use crate::workload::Workload;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("statistical contract violated: {0}")]
    ContractViolated(String),
    #[error("run failed: {0}")]
    Execution(String),
}

impl RunError {
    /// Process exit code: 2 config, 3 contract, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::ContractViolated(_) => 3,
            RunError::Io { .. } => 4,
            RunError::Execution(_) => 1,
        }
    }
}

/// The experiment types behind the CLI verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Profile,
    Instability,
    Theorem,
    Sweep,
    StableCheck,
    Alpha,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Profile,
        Experiment::Instability,
        Experiment::Theorem,
        Experiment::Sweep,
        Experiment::StableCheck,
        Experiment::Alpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Profile => "profile",
            Experiment::Instability => "instability",
            Experiment::Theorem => "theorem",
            Experiment::Sweep => "sweep",
            Experiment::StableCheck => "stable-check",
            Experiment::Alpha => "alpha",
        }
    }

    pub fn parse(name: &str) -> Option<Experiment> {
        Experiment::ALL.iter().copied().find(|e| e.name() == name)
    }
}

/// Dataset construction directive: `iid:N`, `sep:DELTA`, or (sweeps
/// only) `exp:RATE` for N = ceil(exp(RATE * dim)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DatasetSpec {
    Iid { n_points: usize },
    Separated { delta: f64 },
    ExpGrowth { rate: f64 },
}

impl DatasetSpec {
    fn parse(text: &str) -> Result<DatasetSpec, String> {
        let (mode, arg) = text
            .split_once(':')
            .ok_or_else(|| format!("dataset `{text}` must look like iid:N, sep:DELTA, or exp:RATE"))?;
        match mode {
            "iid" => arg
                .parse::<usize>()
                .map(|n_points| DatasetSpec::Iid { n_points })
                .map_err(|_| format!("dataset size `{arg}` is not an integer")),
            "sep" => arg
                .parse::<f64>()
                .map(|delta| DatasetSpec::Separated { delta })
                .map_err(|_| format!("separation delta `{arg}` is not a number")),
            "exp" => arg
                .parse::<f64>()
                .map(|rate| DatasetSpec::ExpGrowth { rate })
                .map_err(|_| format!("growth rate `{arg}` is not a number")),
            other => Err(format!("unknown dataset mode `{other}`")),
        }
    }
}

impl std::fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetSpec::Iid { n_points } => write!(f, "iid:{n_points}"),
            DatasetSpec::Separated { delta } => write!(f, "sep:{delta}"),
            DatasetSpec::ExpGrowth { rate } => write!(f, "exp:{rate}"),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub kind: SpaceKind,
    pub dims: Vec<u32>,
    pub dataset: DatasetSpec,
    pub eps: Vec<f64>,
    pub queries: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub alpha_c1: Option<f64>,
    pub alpha_c2: Option<f64>,
    pub mc_samples: usize,
    /// Bisection tolerance for half-measure radii; per-kind default is
    /// diameter / 1000.
    pub tol: f64,
    pub max_points: usize,
    pub max_rejections: u64,
    pub permutations: usize,
    pub m_floor: Option<f64>,
}

const KNOWN_KEYS: [&str; 15] = [
    "space",
    "dim",
    "dataset",
    "eps",
    "queries",
    "seed",
    "out",
    "alpha-c1",
    "alpha-c2",
    "mc-samples",
    "tol",
    "max-points",
    "max-rejections",
    "permutations",
    "m-floor",
];

/// Parses a flat `key = value` configuration file. `#` starts a comment;
/// a key given twice keeps its later value.
pub fn parse_flat_config(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
    let mut map = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => diagnostics.push(format!("line {}: expected `key = value`", lineno + 1)),
        }
    }
    if diagnostics.is_empty() {
        Ok(map)
    } else {
        Err(diagnostics)
    }
}

/// Extracts the config map (and experiment) from a manifest produced by
/// [`run`], so a run can be reproduced from its own manifest.
pub fn parse_manifest_config(
    text: &str,
) -> Result<(Option<Experiment>, BTreeMap<String, String>), String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("manifest is not JSON: {e}"))?;
    let experiment = value
        .get("experiment")
        .and_then(|v| v.as_str())
        .and_then(Experiment::parse);
    let config = value
        .get("config")
        .and_then(|v| v.as_object())
        .ok_or("manifest has no config object")?;
    let mut map = BTreeMap::new();
    for (k, v) in config {
        let s = v
            .as_str()
            .ok_or_else(|| format!("config entry `{k}` is not a string"))?;
        map.insert(k.clone(), s.to_string());
    }
    Ok((experiment, map))
}

/// Collects every diagnostic for the entries, not just the first.
pub fn validate(experiment: Experiment, entries: &BTreeMap<String, String>) -> Vec<String> {
    match build_config(experiment, entries) {
        Ok(_) => Vec::new(),
        Err(d) => d,
    }
}

/// Resolves entries into a typed configuration, or the full diagnostic
/// list.
pub fn build_config(
    experiment: Experiment,
    entries: &BTreeMap<String, String>,
) -> Result<RunConfig, Vec<String>> {
    let mut diags: Vec<String> = Vec::new();
    for key in entries.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            diags.push(format!("unknown configuration key `{key}`"));
        }
    }

    let kind = match entries.get("space") {
        None => {
            diags.push("missing required key `space`".into());
            None
        }
        Some(s) => match SpaceKind::parse(s) {
            Some(k) => Some(k),
            None => {
                diags.push(format!(
                    "unknown space `{s}` (expected one of {})",
                    SpaceKind::ALL.map(|k| k.name()).join(", ")
                ));
                None
            }
        },
    };

    let dims: Vec<u32> = match entries.get("dim") {
        None => {
            diags.push("missing required key `dim`".into());
            Vec::new()
        }
        Some(s) => {
            let mut out = Vec::new();
            for part in s.split(',') {
                match part.trim().parse::<u32>() {
                    Ok(d) if d >= 1 => out.push(d),
                    _ => diags.push(format!("dimension `{part}` is not a positive integer")),
                }
            }
            out
        }
    };
    if experiment == Experiment::Sweep {
        if dims.len() < 1 {
            diags.push("sweep needs at least one dimension".into());
        }
        if dims.windows(2).any(|w| w[0] >= w[1]) {
            diags.push("sweep dimensions must be strictly ascending".into());
        }
    } else if dims.len() > 1 {
        diags.push(format!(
            "{} takes a single dimension, got {}",
            experiment.name(),
            dims.len()
        ));
    }

    let dataset = match entries.get("dataset") {
        None => DatasetSpec::Iid { n_points: 1000 },
        Some(s) => match DatasetSpec::parse(s) {
            Ok(d) => d,
            Err(e) => {
                diags.push(e);
                DatasetSpec::Iid { n_points: 1000 }
            }
        },
    };

    let mut eps: Vec<f64> = Vec::new();
    match entries.get("eps") {
        None => {}
        Some(s) if s.trim().is_empty() => {
            diags.push("eps list is empty".into());
        }
        Some(s) => {
            for part in s.split(',') {
                match part.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => eps.push(v),
                    _ => diags.push(format!("eps `{part}` is not a finite number")),
                }
            }
        }
    }

    let parse_num = |key: &str, default: u64, diags: &mut Vec<String>| -> u64 {
        match entries.get(key) {
            None => default,
            Some(s) => s.parse::<u64>().unwrap_or_else(|_| {
                diags.push(format!("`{key}` value `{s}` is not a non-negative integer"));
                default
            }),
        }
    };
    let parse_float = |key: &str, diags: &mut Vec<String>| -> Option<f64> {
        entries.get(key).and_then(|s| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                diags.push(format!("`{key}` value `{s}` is not a finite number"));
                None
            }
        })
    };

    let queries = parse_num("queries", 1000, &mut diags) as usize;
    let seed = parse_num("seed", 0, &mut diags);
    let mc_samples = parse_num("mc-samples", 100_000, &mut diags) as usize;
    let max_points = parse_num("max-points", 20_000, &mut diags) as usize;
    let max_rejections = parse_num("max-rejections", 10_000, &mut diags);
    let permutations = parse_num("permutations", 2_000, &mut diags) as usize;
    let alpha_c1 = parse_float("alpha-c1", &mut diags);
    let alpha_c2 = parse_float("alpha-c2", &mut diags);
    let tol_given = parse_float("tol", &mut diags);
    let m_floor = parse_float("m-floor", &mut diags);
    let out_dir = PathBuf::from(
        entries
            .get("out")
            .cloned()
            .unwrap_or_else(|| "simcon-out".to_string()),
    );

    // Semantic checks need the space geometry.
    let (diameter, kind) = match (kind, dims.first()) {
        (Some(k), Some(&d)) => match Space::new(k, d) {
            Ok(space) => (Some(space.diameter()), Some(k)),
            Err(e) => {
                diags.push(e.to_string());
                (None, Some(k))
            }
        },
        (k, _) => (None, k),
    };

    match dataset {
        DatasetSpec::Iid { n_points } if n_points == 0 => {
            diags.push("iid dataset needs at least one point".into());
        }
        DatasetSpec::Separated { delta } => {
            if let Some(diam) = diameter {
                if !(delta > 0.0 && delta < diam) {
                    diags.push(format!(
                        "separation delta {delta} outside (0, {diam}) for this space"
                    ));
                }
                if experiment == Experiment::StableCheck && delta >= diam / 8.0 {
                    diags.push(format!(
                        "stable-check requires delta < diameter/8 = {}",
                        diam / 8.0
                    ));
                }
            }
        }
        DatasetSpec::ExpGrowth { rate } => {
            if experiment != Experiment::Sweep {
                diags.push("exp:RATE dataset growth only applies to sweep runs".into());
            } else if !(rate > 0.0) {
                diags.push(format!("growth rate {rate} must be positive"));
            }
        }
        _ => {}
    }

    if experiment == Experiment::StableCheck {
        if !matches!(dataset, DatasetSpec::Separated { .. }) {
            diags.push("stable-check requires a sep:DELTA dataset".into());
        }
        if eps.is_empty() {
            eps.push(1.0); // the construction concerns 1-unstable queries
        }
    } else if eps.is_empty() {
        diags.push("missing required key `eps`".into());
    }

    match experiment {
        Experiment::Theorem => {
            for &e in &eps {
                if !(e > 0.0 && e < 1.0) {
                    diags.push(format!(
                        "theorem runs require 0 < eps < 1 (count-bound hypothesis), got {e}"
                    ));
                }
            }
        }
        Experiment::Alpha => {
            if eps.windows(2).any(|w| w[0] >= w[1]) {
                diags.push("alpha eps grid must be strictly ascending".into());
            }
            if let (Some(first), Some(diam)) = (eps.first(), diameter) {
                if *first <= 0.0 || eps.last().copied().unwrap_or(0.0) > diam {
                    diags.push(format!("alpha eps grid must lie in (0, {diam}]"));
                }
            }
        }
        _ => {
            for &e in &eps {
                if e < 0.0 {
                    diags.push(format!("eps {e} must be non-negative"));
                }
            }
        }
    }

    if queries < 100 && experiment != Experiment::Alpha {
        diags.push(format!("queries must be at least 100, got {queries}"));
    }
    if mc_samples < 100 {
        diags.push(format!("mc-samples must be at least 100, got {mc_samples}"));
    }
    if permutations == 0 {
        diags.push("permutations must be positive".into());
    }
    if max_points == 0 {
        diags.push("max-points must be positive".into());
    }
    if let Some(t) = tol_given {
        if !(t > 0.0) {
            diags.push(format!("tol must be positive, got {t}"));
        }
    }
    if let Some(f) = m_floor {
        if !(f > 0.0) {
            diags.push(format!("m-floor must be positive, got {f}"));
        }
    }

    if !diags.is_empty() {
        return Err(diags);
    }
    let diameter = diameter.expect("validated space");
    Ok(RunConfig {
        experiment,
        kind: kind.expect("validated kind"),
        dims,
        dataset,
        eps,
        queries,
        seed,
        out_dir,
        alpha_c1,
        alpha_c2,
        mc_samples,
        tol: tol_given.unwrap_or(diameter / 1000.0),
        max_points,
        max_rejections,
        permutations,
        m_floor,
    })
}

impl RunConfig {
    /// Canonical flat entries reproducing this configuration exactly.
    pub fn to_entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("space".into(), self.kind.name().to_string());
        m.insert(
            "dim".into(),
            self.dims
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert("dataset".into(), self.dataset.to_string());
        m.insert(
            "eps".into(),
            self.eps
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert("queries".into(), self.queries.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("out".into(), self.out_dir.display().to_string());
        if let Some(c1) = self.alpha_c1 {
            m.insert("alpha-c1".into(), c1.to_string());
        }
        if let Some(c2) = self.alpha_c2 {
            m.insert("alpha-c2".into(), c2.to_string());
        }
        m.insert("mc-samples".into(), self.mc_samples.to_string());
        m.insert("tol".into(), self.tol.to_string());
        m.insert("max-points".into(), self.max_points.to_string());
        m.insert("max-rejections".into(), self.max_rejections.to_string());
        m.insert("permutations".into(), self.permutations.to_string());
        if let Some(f) = self.m_floor {
            m.insert("m-floor".into(), f.to_string());
        }
        m
    }

    fn space(&self) -> Space {
        Space::new(self.kind, self.dims[0]).expect("validated")
    }

    fn constants_for(&self, dim: u32) -> LevyConstants {
        LevyConstants::defaults_for(self.kind, dim).with_overrides(self.alpha_c1, self.alpha_c2)
    }

    fn build_workload(&self) -> Result<Workload, RunError> {
        let space = self.space();
        match self.dataset {
            DatasetSpec::Iid { n_points } => Workload::build_iid(space, n_points, self.seed),
            DatasetSpec::Separated { delta } => Workload::build_separated(
                space,
                delta,
                self.seed,
                self.max_rejections,
                self.max_points,
            ),
            DatasetSpec::ExpGrowth { .. } => unreachable!("validated: sweep only"),
        }
        .map_err(|e| RunError::Execution(e.to_string()))
    }
}

/// What a run produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

/// Executes the configured experiment and writes its artifacts.
///
/// Identical configurations produce byte-identical artifacts regardless
/// of worker count; a run can be reproduced from its manifest via
/// `--config <out>/manifest.json`.
pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| RunError::Io {
        path: config.out_dir.clone(),
        source: e,
    })?;
    let mut outputs: Vec<String> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut contract_failures: Vec<String> = Vec::new();

    match config.experiment {
        Experiment::Profile => {
            let workload = config.build_workload()?;
            let profile = workload
                .profile(
                    config.eps[0],
                    config.queries,
                    config.tol,
                    config.mc_samples,
                    derive_seed(config.seed, 101),
                )
                .map_err(|e| RunError::Execution(e.to_string()))?;
            let mut rx = String::from("index,r_x\n");
            for (i, r) in profile.r_x.iter().enumerate() {
                let _ = writeln!(rx, "{i},{r}");
            }
            write_artifact(config, "rx.csv", rx.as_bytes(), &mut outputs)?;
            #[derive(Serialize)]
            struct ProfileReport<'a> {
                space: &'a str,
                dim: u32,
                n_points: usize,
                median_nn: f64,
                median_nn_stderr: f64,
                r_interval_width: f64,
                homogeneity_eps: f64,
                is_weakly_homogeneous: bool,
            }
            let report = ProfileReport {
                space: config.kind.name(),
                dim: config.dims[0],
                n_points: workload.len(),
                median_nn: profile.median_nn,
                median_nn_stderr: profile.median_nn_stderr,
                r_interval_width: profile.r_interval_width,
                homogeneity_eps: profile.homogeneity_eps,
                is_weakly_homogeneous: profile.is_weakly_homogeneous,
            };
            write_json(config, "report.json", &report, &mut outputs)?;
            notes.push(format!(
                "weakly homogeneous: {} (width {})",
                profile.is_weakly_homogeneous, profile.r_interval_width
            ));
        }
        Experiment::Instability => {
            let workload = config.build_workload()?;
            let mut summaries = Vec::new();
            for (i, &eps) in config.eps.iter().enumerate() {
                let stats = query_stats(&workload, eps, config.queries, config.seed);
                write_query_csv(config, i, &stats, &mut outputs)?;
                let est = instability_from_stats(&stats)
                    .map_err(|e| RunError::Execution(e.to_string()))?;
                summaries.push(serde_json::json!({
                    "eps": eps,
                    "fraction": est.fraction,
                    "stderr": est.stderr,
                    "queries_counted": est.queries_counted,
                    "coincident_excluded": est.coincident_excluded,
                }));
                notes.push(format!("eps={eps}: unstable fraction {}", est.fraction));
            }
            write_json(
                config,
                "report.json",
                &serde_json::json!({ "per_eps": summaries }),
                &mut outputs,
            )?;
        }
        Experiment::Theorem => {
            let workload = config.build_workload()?;
            let constants = config.constants_for(config.dims[0]);
            let mut reports = Vec::new();
            for (i, &eps) in config.eps.iter().enumerate() {
                let stats = query_stats(&workload, eps, config.queries, config.seed);
                write_query_csv(config, i, &stats, &mut outputs)?;
                let report = verify_count_bound_from_stats(
                    &workload,
                    eps,
                    &stats,
                    &constants,
                    config.tol,
                    config.mc_samples,
                    config.seed,
                )
                .map_err(|e| RunError::Execution(e.to_string()))?;
                if report.informational {
                    notes.push(format!(
                        "eps={eps}: homogeneity precondition failed (width {} vs {}); informational only",
                        report.homogeneity.r_interval_width, report.homogeneity.threshold
                    ));
                } else if !report.contract_ok {
                    contract_failures.push(format!(
                        "eps={eps}: violation fraction {} exceeds mass bound {} + 4se",
                        report.violation_fraction, report.mass_bound
                    ));
                }
                notes.push(format!(
                    "eps={eps}: violations {} vs mass bound {} (count bound {})",
                    report.violation_fraction, report.mass_bound, report.count_bound
                ));
                reports.push(report);
            }
            write_json(config, "report.json", &reports, &mut outputs)?;
        }
        Experiment::Sweep => {
            let size = match config.dataset {
                DatasetSpec::Iid { n_points } => DatasetSize::Fixed { n_points },
                DatasetSpec::ExpGrowth { rate } => DatasetSize::ExpGrowth { rate },
                DatasetSpec::Separated { .. } => {
                    return Err(RunError::Config(vec![
                        "sweep runs take iid:N or exp:RATE datasets".into(),
                    ]))
                }
            };
            let sweep = dimension_sweep(
                config.kind,
                &config.dims,
                size,
                config.eps[0],
                config.queries,
                config.seed,
                (config.alpha_c1, config.alpha_c2),
                config.m_floor,
                config.permutations,
            )
            .map_err(|e| RunError::Execution(e.to_string()))?;
            let mut csv = String::from(
                "dim,n_points,m_hat,m_hat_flagged,instability_fraction,instability_stderr,\
                 mean_count_closed,median_count_closed,count_bound,mass_bound,violation_fraction\n",
            );
            for r in &sweep.rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.dim,
                    r.n_points,
                    r.m_hat,
                    r.m_hat_flagged,
                    r.instability_fraction,
                    r.instability_stderr,
                    r.mean_count_closed,
                    r.median_count_closed,
                    r.count_bound,
                    r.mass_bound,
                    r.violation_fraction
                );
            }
            write_artifact(config, "sweep.csv", csv.as_bytes(), &mut outputs)?;
            write_json(config, "report.json", &sweep, &mut outputs)?;
            if let Some(slope) = &sweep.slope {
                notes.push(format!(
                    "log-count slope {} (permutation p = {})",
                    slope.slope, slope.p_value
                ));
            }
        }
        Experiment::StableCheck => {
            let DatasetSpec::Separated { delta } = config.dataset else {
                unreachable!("validated: stable-check uses sep datasets")
            };
            let report = stable_workload_check(
                config.space(),
                delta,
                config.eps[0],
                config.queries,
                config.seed,
                config.max_rejections,
                config.max_points,
            )
            .map_err(|e| RunError::Execution(e.to_string()))?;
            let mut csv = String::from("query_index\n");
            for i in &report.unstable_query_indices {
                let _ = writeln!(csv, "{i}");
            }
            write_artifact(config, "unstable.csv", csv.as_bytes(), &mut outputs)?;
            notes.push(format!(
                "{} unstable queries; within 8*delta: {}; m_hat {} vs delta/2 {}",
                report.unstable_query_indices.len(),
                report.within_eight_delta,
                report.m_hat,
                delta / 2.0
            ));
            write_json(config, "report.json", &report, &mut outputs)?;
        }
        Experiment::Alpha => {
            let space = config.space();
            let constants = config.constants_for(config.dims[0]);
            let curve = concentration_curve(
                &space,
                &config.eps,
                &constants,
                config.mc_samples,
                config.seed,
            )
            .map_err(|e| RunError::Execution(e.to_string()))?;
            let mut csv = String::from("eps,alpha_lower,alpha_upper,stderr\n");
            for i in 0..curve.epsilons.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    curve.epsilons[i], curve.alpha_lower[i], curve.alpha_upper[i], curve.stderr[i]
                );
            }
            write_artifact(config, "curve.csv", csv.as_bytes(), &mut outputs)?;
            write_json(config, "report.json", &curve, &mut outputs)?;
        }
    }

    // The manifest lists every artifact, itself excluded.
    #[derive(Serialize)]
    struct Manifest {
        tool: &'static str,
        version: &'static str,
        experiment: &'static str,
        config: BTreeMap<String, String>,
        outputs: Vec<String>,
    }
    let manifest = Manifest {
        tool: "simcon",
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.name(),
        config: config.to_entries(),
        outputs: outputs.clone(),
    };
    write_json(config, "manifest.json", &manifest, &mut outputs)?;

    if !contract_failures.is_empty() {
        return Err(RunError::ContractViolated(contract_failures.join("; ")));
    }
    Ok(RunSummary {
        experiment: config.experiment,
        out_dir: config.out_dir.clone(),
        outputs,
        notes,
    })
}

fn write_query_csv(
    config: &RunConfig,
    eps_index: usize,
    stats: &[QueryStat],
    outputs: &mut Vec<String>,
) -> Result<(), RunError> {
    let mut csv = String::from("query_index,d_x,count_open,count_closed,unstable,coincident\n");
    for s in stats {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            s.query_index.expect("stream query"),
            s.d_x,
            s.count_open,
            s.count_closed,
            s.unstable,
            s.coincident
        );
    }
    write_artifact(config, &format!("queries_{eps_index}.csv"), csv.as_bytes(), outputs)
}

fn write_artifact(
    config: &RunConfig,
    name: &str,
    bytes: &[u8],
    outputs: &mut Vec<String>,
) -> Result<(), RunError> {
    let path = config.out_dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| RunError::Io {
        path: path.clone(),
        source: e,
    })?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_json<T: Serialize>(
    config: &RunConfig,
    name: &str,
    value: &T,
    outputs: &mut Vec<String>,
) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization");
    text.push('\n');
    write_artifact(config, name, text.as_bytes(), outputs)
}

/// Reads a config file: flat key-value text, or a manifest JSON from a
/// previous run (detected by a leading `{`).
pub fn load_config_file(
    path: &Path,
) -> Result<(Option<Experiment>, BTreeMap<String, String>), RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if text.trim_start().starts_with('{') {
        parse_manifest_config(&text).map_err(|e| RunError::Config(vec![e]))
    } else {
        parse_flat_config(&text)
            .map(|m| (None, m))
            .map_err(RunError::Config)
    }
}
