use std::fs;
use std::path::Path;

use atnmf_core::datasets::{self, DatasetDescriptor, DatasetKind, Normalization};
use atnmf_core::experiment::{self, ExperimentConfig};
use atnmf_core::synthgen::{generate_synthetic_seeded, SyntheticSpec};
use atnmf_core::{eval, Error, Method, ObservationMask, RngState, SolverConfig};

use crate::{ExperimentArgs, KindArg, MethodArg, NormalizationArg, SolveArgs, SynthArgs};

/// 2 for usage, config and file-access problems; 1 for failures during a run.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig { .. } | Error::Validation(_) | Error::Parse { .. } | Error::InvalidInput(_) | Error::Io { .. } => 2,
        Error::Dimension { .. } | Error::NonFinite { .. } | Error::NegativeEntry { .. } | Error::Restart { .. } => 1,
    }
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Nmf => Method::Nmf,
            MethodArg::Atnmf => Method::AtNmf,
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn synth(args: SynthArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        f: args.f,
        n: args.n,
        k: args.k,
        a: args.a,
        b: args.b,
    };
    let data = generate_synthetic_seeded(&spec, args.seed)?;
    datasets::write_dense(&data.v, &args.out)?;
    if let Some(dir) = &args.truth_dir {
        create_dir(dir)?;
        datasets::write_dense(&data.truth.w, dir.join("W.txt"))?;
        datasets::write_dense(&data.truth.h, dir.join("H.txt"))?;
    }
    log::info!("wrote {}x{} matrix to {}", spec.f, spec.n, args.out.display());
    Ok(())
}

pub fn solve(args: SolveArgs) -> Result<(), Error> {
    let kind = match args.kind {
        KindArg::Dense => DatasetKind::Dense,
        KindArg::ImageGrid => DatasetKind::ImageGrid,
        KindArg::Hyperspectral => {
            let need = |v: Option<usize>, param: &'static str| {
                v.ok_or_else(|| Error::InvalidConfig {
                    param,
                    reason: "is required for --kind hyperspectral".into(),
                })
            };
            DatasetKind::HyperspectralCube {
                bands: need(args.bands, "bands")?,
                width: need(args.width, "width")?,
                height: need(args.height, "height")?,
            }
        }
    };
    let descriptor = DatasetDescriptor {
        kind,
        path: args.input.clone(),
        normalization: match args.normalization {
            NormalizationArg::None => Normalization::None,
            NormalizationArg::Cbcl => Normalization::Cbcl,
            NormalizationArg::UnitScale => Normalization::UnitScale,
        },
        expected_f: None,
        expected_n: None,
    };
    let method = Method::from(args.method);
    let cfg = SolverConfig {
        lambda: args.lambda,
        k: args.k,
        eps_in: args.eps_in,
        eps_out: args.eps_out,
        max_inner: args.max_inner,
        max_outer: args.max_outer,
        ..SolverConfig::default()
    };
    cfg.validate(method == Method::AtNmf)?;

    let v = descriptor.load()?;
    let split = match args.alpha {
        Some(alpha) => Some(eval::holdout_split(
            v.rows(),
            v.cols(),
            alpha,
            &mut RngState::with_stream(args.seed, eval::SPLIT_STREAM),
        )?),
        None => None,
    };
    let mask = split
        .as_ref()
        .map(|s| s.mask.clone())
        .unwrap_or_else(|| ObservationMask::full(v.rows(), v.cols()));

    let solution = method.solve(&v, &mask, &cfg, &mut RngState::new(args.seed))?;

    create_dir(&args.out)?;
    datasets::write_dense(&solution.factors.w, args.out.join("W.txt"))?;
    datasets::write_dense(&solution.factors.h, args.out.join("H.txt"))?;
    if method == Method::AtNmf {
        datasets::write_dense(solution.perturbation.as_matrix(), args.out.join("R.txt"))?;
    }
    let trace_path = args.out.join("trace.csv");
    let mut buf = Vec::new();
    solution.trace.write_csv(&mut buf).expect("writing to memory");
    fs::write(&trace_path, buf).map_err(|source| Error::Io { path: trace_path, source })?;

    if let Some(split) = split {
        let score = eval::rmse(&v, &solution.reconstruct()?, &split.gamma_set)?;
        println!("rmse {score}");
    }
    Ok(())
}

pub fn experiment(args: ExperimentArgs, verbosity: u8) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = args.restarts {
        cfg.restarts = r;
    }
    if let Some(a) = args.alphas {
        cfg.alphas = a;
    }
    if let Some(m) = args.methods {
        cfg.methods = m.into_iter().map(Method::from).collect();
    }
    if let Some(l) = args.lambdas {
        cfg.lambdas = l;
    }
    if let Some(k) = args.k {
        cfg.solver.k = k;
    }
    if let Some(e) = args.eps_in {
        cfg.solver.eps_in = e;
    }
    if let Some(e) = args.eps_out {
        cfg.solver.eps_out = e;
    }
    if let Some(m) = args.max_inner {
        cfg.solver.max_inner = m;
    }
    if let Some(m) = args.max_outer {
        cfg.solver.max_outer = m;
    }
    cfg.verbosity = cfg.verbosity.max(verbosity);

    let results = experiment::run_and_write(&cfg)?;
    print!("{}", results.results_csv());
    Ok(())
}
