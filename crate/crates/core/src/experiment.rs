//! Experiment grids over hold-out fraction, method and `lambda`.
//!
//! Configs are flat `key = value` text with comma-separated lists and `#`
//! comments. After a run the effective config (all defaults filled in) is
//! written next to the results so the run can be replayed exactly.
//!
//! ```text
//! dataset = synthetic
//! alphas = 0.3, 0.5, 0.9
//! methods = nmf, atnmf
//! lambdas = 2, 3, 5
//! restarts = 10
//! seed = 1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datasets::{DatasetDescriptor, DatasetKind, Normalization};
use crate::error::{Error, Result};
use crate::eval::{holdout_size, holdout_split, run_on_split, RunSummary, SPLIT_STREAM};
use crate::matrix::NonnegMatrix;
use crate::sampling::RngState;
use crate::solver::{Method, SolverConfig};
use crate::synthgen::{generate_synthetic_seeded, SyntheticSpec};

pub const RESULTS_FILE: &str = "results.csv";
pub const SWEEP_FILE: &str = "lambda_sweep.csv";
pub const CONFIG_ECHO_FILE: &str = "config.effective.txt";
pub const CSV_HEADER: &str = "dataset,alpha,method,lambda,k,restarts,rmse_mean,rmse_std,seed";

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic { spec: SyntheticSpec, seed: u64 },
    File(DatasetDescriptor),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSource,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub methods: Vec<Method>,
    pub restarts: usize,
    pub seed: u64,
    /// Solver parameters; `lambda` is taken from the grid, not from here.
    pub solver: SolverConfig,
    /// Extra `lambda` values run at `sweep_alpha` for RMSE-vs-lambda curves.
    pub sweep_lambdas: Vec<f64>,
    pub sweep_alpha: f64,
    pub verbosity: u8,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "synthetic".into(),
            data: DataSource::Synthetic {
                spec: SyntheticSpec::default(),
                seed: 0,
            },
            alphas: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            lambdas: vec![3.0],
            methods: vec![Method::Nmf, Method::AtNmf],
            restarts: 10,
            seed: 0,
            solver: SolverConfig::default(),
            sweep_lambdas: Vec::new(),
            sweep_alpha: 0.5,
            verbosity: 0,
            out_dir: PathBuf::from("results"),
        }
    }
}

fn parse_list<T>(key: &str, raw: &str, parse: impl Fn(&str) -> Option<T>) -> std::result::Result<Vec<T>, String> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|item| parse(item.trim()).ok_or_else(|| format!("{key}: cannot parse {:?}", item.trim())))
        .collect()
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Parses and validates a config; every problem is reported at once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut problems = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    col: 1,
                    msg: "expected key = value".into(),
                });
            };
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                problems.push(format!("{key}: given more than once"));
            }
        }

        let mut cfg = ExperimentConfig::default();
        let mut get = |key: &str| entries.remove(key);
        macro_rules! scalar {
            ($key:literal, $slot:expr) => {
                if let Some(raw) = get($key) {
                    match raw.parse() {
                        Ok(v) => $slot = v,
                        Err(_) => problems.push(format!("{}: cannot parse {:?}", $key, raw)),
                    }
                }
            };
        }

        let dataset = get("dataset").unwrap_or_else(|| "synthetic".into());
        let mut spec = SyntheticSpec::default();
        let mut data_seed: Option<u64> = None;
        scalar!("synth_f", spec.f);
        scalar!("synth_n", spec.n);
        scalar!("synth_k", spec.k);
        scalar!("synth_a", spec.a);
        scalar!("synth_b", spec.b);
        if let Some(raw) = get("data_seed") {
            match raw.parse() {
                Ok(v) => data_seed = Some(v),
                Err(_) => problems.push(format!("data_seed: cannot parse {raw:?}")),
            }
        }

        let kind = get("kind").unwrap_or_else(|| "dense".into());
        let (mut bands, mut width, mut height) = (0usize, 0usize, 0usize);
        scalar!("bands", bands);
        scalar!("width", width);
        scalar!("height", height);
        let mut normalization = Normalization::None;
        if let Some(raw) = get("normalization") {
            match raw.parse() {
                Ok(n) => normalization = n,
                Err(e) => problems.push(e.to_string()),
            }
        }
        let mut expected_f: Option<usize> = None;
        let mut expected_n: Option<usize> = None;
        for (key, slot) in [("expected_f", &mut expected_f), ("expected_n", &mut expected_n)] {
            if let Some(raw) = get(key) {
                match raw.parse() {
                    Ok(v) => *slot = Some(v),
                    Err(_) => problems.push(format!("{key}: cannot parse {raw:?}")),
                }
            }
        }

        scalar!("restarts", cfg.restarts);
        scalar!("seed", cfg.seed);
        scalar!("k", cfg.solver.k);
        scalar!("eps_in", cfg.solver.eps_in);
        scalar!("eps_out", cfg.solver.eps_out);
        scalar!("max_inner", cfg.solver.max_inner);
        scalar!("max_outer", cfg.solver.max_outer);
        scalar!("init_mm_steps", cfg.solver.init_mm_steps);
        scalar!("div_floor", cfg.solver.div_floor);
        scalar!("sweep_alpha", cfg.sweep_alpha);
        scalar!("verbosity", cfg.verbosity);
        if let Some(out) = get("out") {
            cfg.out_dir = PathBuf::from(out);
        }

        let float = |s: &str| s.parse::<f64>().ok();
        for (key, slot) in [
            ("alphas", &mut cfg.alphas),
            ("lambdas", &mut cfg.lambdas),
            ("sweep_lambdas", &mut cfg.sweep_lambdas),
        ] {
            if let Some(raw) = get(key) {
                match parse_list(key, &raw, float) {
                    Ok(v) => *slot = v,
                    Err(e) => problems.push(e),
                }
            }
        }
        if let Some(raw) = get("methods") {
            match parse_list("methods", &raw, |s| s.parse::<Method>().ok()) {
                Ok(v) => cfg.methods = v,
                Err(e) => problems.push(e),
            }
        }

        let name = get("name");
        if dataset == "synthetic" {
            cfg.data = DataSource::Synthetic {
                spec,
                seed: data_seed.unwrap_or(cfg.seed),
            };
            cfg.name = name.unwrap_or_else(|| "synthetic".into());
        } else {
            let kind = match kind.as_str() {
                "dense" => Some(DatasetKind::Dense),
                "image-grid" => Some(DatasetKind::ImageGrid),
                "hyperspectral" => Some(DatasetKind::HyperspectralCube { bands, width, height }),
                other => {
                    problems.push(format!("kind: unknown value {other:?}"));
                    None
                }
            };
            let path = PathBuf::from(&dataset);
            cfg.name = name.unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| dataset.clone())
            });
            if let Some(kind) = kind {
                cfg.data = DataSource::File(DatasetDescriptor {
                    kind,
                    path,
                    normalization,
                    expected_f,
                    expected_n,
                });
            }
        }

        for key in entries.keys() {
            problems.push(format!("{key}: unknown key"));
        }
        problems.extend(cfg.problems());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    /// Every violated constraint, in a stable order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.methods.is_empty() {
            out.push("methods: at least one method is required".into());
        }
        if self.alphas.is_empty() {
            out.push("alphas: at least one value is required".into());
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 1.0) {
                out.push(format!("alphas: {a} is outside (0, 1)"));
            }
        }
        let wants_atnmf = self.methods.contains(&Method::AtNmf);
        if wants_atnmf && self.lambdas.is_empty() {
            out.push("lambdas: atnmf needs at least one lambda".into());
        }
        if wants_atnmf {
            for &l in &self.lambdas {
                if !(l > 1.0 && l.is_finite()) {
                    out.push(format!("lambdas: {l} must be > 1 for atnmf"));
                }
            }
        }
        for &l in &self.sweep_lambdas {
            if !(l > 1.0 && l.is_finite()) {
                out.push(format!("sweep_lambdas: {l} must be > 1"));
            }
        }
        if !self.sweep_lambdas.is_empty() && !(self.sweep_alpha > 0.0 && self.sweep_alpha < 1.0) {
            out.push(format!("sweep_alpha: {} is outside (0, 1)", self.sweep_alpha));
        }
        if self.restarts == 0 {
            out.push("restarts: must be at least 1".into());
        }
        if let Err(e) = self.solver.validate(false) {
            out.push(e.to_string());
        }
        match &self.data {
            DataSource::Synthetic { spec, .. } => {
                if let Err(e) = spec.validate() {
                    out.push(format!("synthetic: {e}"));
                }
            }
            DataSource::File(d) => {
                if let DatasetKind::HyperspectralCube { bands, width, height } = d.kind {
                    if bands == 0 || width == 0 || height == 0 {
                        out.push("hyperspectral: bands, width and height must all be positive".into());
                    }
                }
            }
        }
        out
    }

    /// The full config with defaults filled in; parsing it yields `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let s_ = &mut s;
        let mut kv = |k: &str, v: String| writeln!(s_, "{k} = {v}").unwrap();
        kv("name", self.name.clone());
        match &self.data {
            DataSource::Synthetic { spec, seed } => {
                kv("dataset", "synthetic".into());
                kv("synth_f", spec.f.to_string());
                kv("synth_n", spec.n.to_string());
                kv("synth_k", spec.k.to_string());
                kv("synth_a", spec.a.to_string());
                kv("synth_b", spec.b.to_string());
                kv("data_seed", seed.to_string());
            }
            DataSource::File(d) => {
                kv("dataset", d.path.display().to_string());
                match d.kind {
                    DatasetKind::Dense => kv("kind", "dense".into()),
                    DatasetKind::ImageGrid => kv("kind", "image-grid".into()),
                    DatasetKind::HyperspectralCube { bands, width, height } => {
                        kv("kind", "hyperspectral".into());
                        kv("bands", bands.to_string());
                        kv("width", width.to_string());
                        kv("height", height.to_string());
                    }
                }
                kv("normalization", d.normalization.name().into());
                if let Some(f) = d.expected_f {
                    kv("expected_f", f.to_string());
                }
                if let Some(n) = d.expected_n {
                    kv("expected_n", n.to_string());
                }
            }
        }
        kv("alphas", fmt_list(&self.alphas));
        kv("methods", self.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(", "));
        kv("lambdas", fmt_list(&self.lambdas));
        kv("sweep_lambdas", fmt_list(&self.sweep_lambdas));
        kv("sweep_alpha", self.sweep_alpha.to_string());
        kv("k", self.solver.k.to_string());
        kv("restarts", self.restarts.to_string());
        kv("seed", self.seed.to_string());
        kv("eps_in", self.solver.eps_in.to_string());
        kv("eps_out", self.solver.eps_out.to_string());
        kv("max_inner", self.solver.max_inner.to_string());
        kv("max_outer", self.solver.max_outer.to_string());
        kv("init_mm_steps", self.solver.init_mm_steps.to_string());
        kv("div_floor", self.solver.div_floor.to_string());
        kv("verbosity", self.verbosity.to_string());
        kv("out", self.out_dir.display().to_string());
        s
    }

    pub fn load_data(&self) -> Result<NonnegMatrix> {
        match &self.data {
            DataSource::Synthetic { spec, seed } => Ok(generate_synthetic_seeded(spec, *seed)?.v),
            DataSource::File(d) => d.load(),
        }
    }

    /// `(alpha, method, lambda)` cells of the main grid in output order.
    pub fn cells(&self) -> Vec<(f64, Method, Option<f64>)> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &method in &self.methods {
                match method {
                    Method::Nmf => out.push((alpha, method, None)),
                    Method::AtNmf => out.extend(self.lambdas.iter().map(|&l| (alpha, method, Some(l)))),
                }
            }
        }
        out
    }

    fn sweep_cells(&self) -> Vec<(f64, Method, Option<f64>)> {
        if self.sweep_lambdas.is_empty() {
            return Vec::new();
        }
        std::iter::once((self.sweep_alpha, Method::Nmf, None))
            .chain(self.sweep_lambdas.iter().map(|&l| (self.sweep_alpha, Method::AtNmf, Some(l))))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub dataset: String,
    pub lambda: Option<f64>,
    pub summary: RunSummary,
}

impl CellResult {
    pub fn csv_row(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset,
            s.alpha,
            s.method,
            self.lambda.map(|l| l.to_string()).unwrap_or_default(),
            s.config.k,
            s.restarts(),
            s.mean,
            s.std,
            s.base_seed
        )
    }
}

#[derive(Clone, Debug)]
pub struct GridResults {
    pub cells: Vec<CellResult>,
    pub sweep: Vec<CellResult>,
}

fn render_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&c.csv_row());
        out.push('\n');
    }
    out
}

impl GridResults {
    pub fn results_csv(&self) -> String {
        render_csv(&self.cells)
    }

    pub fn sweep_csv(&self) -> String {
        render_csv(&self.sweep)
    }
}

/// Runs every cell; nothing is written to disk.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridResults> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let v = cfg.load_data()?;
    let (f, n) = v.shape();
    let mut problems = Vec::new();
    for &alpha in cfg.alphas.iter().chain(cfg.sweep_lambdas.first().map(|_| &cfg.sweep_alpha)) {
        let held = holdout_size(f, n, alpha);
        if held == 0 || held >= f * n {
            problems.push(format!("alpha {alpha} leaves no usable split of a {f}x{n} matrix"));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let run = |cells: Vec<(f64, Method, Option<f64>)>| -> Result<Vec<CellResult>> {
        cells
            .into_par_iter()
            .map(|(alpha, method, lambda)| {
                let split = holdout_split(f, n, alpha, &mut RngState::with_stream(cfg.seed, SPLIT_STREAM))?;
                let solver = SolverConfig {
                    lambda: lambda.unwrap_or(cfg.solver.lambda),
                    ..cfg.solver.clone()
                };
                let summary = run_on_split(&v, &split, method, &solver, cfg.restarts, cfg.seed)?;
                log::info!(
                    "{} alpha={alpha} {method} lambda={lambda:?}: {:.4} ± {:.4}",
                    cfg.name,
                    summary.mean,
                    summary.std
                );
                Ok(CellResult {
                    dataset: cfg.name.clone(),
                    lambda,
                    summary,
                })
            })
            .collect()
    };
    Ok(GridResults {
        cells: run(cfg.cells())?,
        sweep: run(cfg.sweep_cells())?,
    })
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes results, the optional lambda sweep, the config echo and (at
/// verbosity >= 1) per-restart traces under `cfg.out_dir`.
pub fn write_outputs(cfg: &ExperimentConfig, results: &GridResults) -> Result<()> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if cfg.verbosity >= 1 {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
        for (tag, cells) in [("grid", &results.cells), ("sweep", &results.sweep)] {
            for c in cells.iter() {
                for (r, trace) in c.summary.traces.iter().enumerate() {
                    let lambda = c.lambda.map(|l| format!("_lambda{l}")).unwrap_or_default();
                    let path = traces.join(format!("{tag}_alpha{}_{}{lambda}_r{r}.csv", c.summary.alpha, c.summary.method));
                    let mut buf = Vec::new();
                    trace.write_csv(&mut buf).map_err(|e| Error::io(&path, e))?;
                    write_atomic(&path, &String::from_utf8(buf).expect("ascii csv"))?;
                }
            }
        }
    }
    if !results.sweep.is_empty() {
        write_atomic(&dir.join(SWEEP_FILE), &results.sweep_csv())?;
    }
    write_atomic(&dir.join(CONFIG_ECHO_FILE), &cfg.to_config_string())?;
    write_atomic(&dir.join(RESULTS_FILE), &results.results_csv())
}

pub fn run_and_write(cfg: &ExperimentConfig) -> Result<GridResults> {
    let results = run_grid(cfg)?;
    write_outputs(cfg, &results)?;
    Ok(results)
}
