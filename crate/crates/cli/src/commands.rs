use std::path::{Path, PathBuf};

use boltzkern::data::{default_gamma_grid, gaussian_nw_baseline, DataSource, SplitSpec};
use boltzkern::evaluation::{draw_frequencies, evaluate_at, summarize, EvaluationRow, Method, SeedSummary};
use boltzkern::rff::{kernel_matrix, FrequencySet};
use boltzkern::spectral::external::{serve_exact, ExternalEndpoint};
use boltzkern::spectral::GibbsSchedule;
use boltzkern::training::{initial_params, train_with, OptimizerKind};
use boltzkern::{derived_rng, Sampler, SamplerBackend, SpectralModelParams, TrainConfig};
use serde::Serialize;

use crate::args::{
    BackendKind, BaselineArgs, EvaluateArgs, KernelDumpArgs, OptimizerArg, SamplerArgs, ServeArgs, SpectrumArgs,
    TrainArgs,
};
use crate::dataset::{load, resolve_source, split_spec, write_cache};
use crate::error::{CliError, CliResult};
use crate::output::{create, read_json, read_params, write_csv_rows, write_json, write_manifest, write_params};

/// Applies sampler flags on top of `fallback`.
pub fn backend_from(args: &SamplerArgs, fallback: SamplerBackend) -> CliResult<SamplerBackend> {
    let kind = match (args.backend, &fallback) {
        (Some(k), _) => k,
        (None, SamplerBackend::Exact) => BackendKind::Exact,
        (None, SamplerBackend::BlockGibbs(_)) => BackendKind::Gibbs,
        (None, SamplerBackend::External(_)) => BackendKind::External,
    };
    Ok(match kind {
        BackendKind::Exact => SamplerBackend::Exact,
        BackendKind::Gibbs => {
            let base = match fallback {
                SamplerBackend::BlockGibbs(s) => s,
                _ => GibbsSchedule::default(),
            };
            SamplerBackend::BlockGibbs(GibbsSchedule {
                burn_in: args.burn_in.unwrap_or(base.burn_in),
                thinning: args.thinning.unwrap_or(base.thinning),
            })
        }
        BackendKind::External => match (&args.sampler_cmd, fallback) {
            (Some(cmd), _) => {
                let mut parts = cmd.split_whitespace().map(String::from);
                let program = parts
                    .next()
                    .ok_or_else(|| CliError::Usage("--sampler-cmd is empty".into()))?;
                SamplerBackend::External(ExternalEndpoint::Command {
                    program,
                    args: parts.collect(),
                })
            }
            (None, SamplerBackend::External(endpoint)) => SamplerBackend::External(endpoint),
            (None, _) => return Err(CliError::Usage("--backend external needs --sampler-cmd".into())),
        },
    })
}

pub fn train_config(args: &TrainArgs) -> CliResult<TrainConfig> {
    let mut config: TrainConfig = match &args.config {
        Some(path) => read_json(path).map_err(|e| CliError::Usage(format!("config: {e}")))?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    match args.optimizer {
        Some(OptimizerArg::Adam) if !matches!(config.optimizer, OptimizerKind::Adam { .. }) => {
            config.optimizer = OptimizerKind::default();
        }
        Some(OptimizerArg::Sgd) => config.optimizer = OptimizerKind::Sgd,
        _ => {}
    }
    if args.reads.is_some() {
        config.samples_per_iteration = args.reads;
    }
    if let Some(v) = args.eps {
        config.eps_nw = v;
    }
    if let Some(v) = args.n_visible {
        config.n_visible = v;
    }
    if let Some(v) = args.n_hidden {
        config.n_hidden = v;
    }
    config.baseline_subtraction |= args.baseline_subtraction;
    config.record_timing |= args.timing;
    config.backend = backend_from(&args.sampler, config.backend)?;
    Ok(config)
}

#[derive(Serialize)]
struct DataEcho<'a> {
    dataset: &'a DataSource,
    split: SplitSpec,
}

#[derive(Serialize)]
struct TrainEcho<'a> {
    #[serde(flatten)]
    data: DataEcho<'a>,
    config: &'a TrainConfig,
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let config = train_config(args)?;
    let source = resolve_source(&args.data, config.seed)?;
    let split = split_spec(&args.data, config.seed);
    let echo = TrainEcho {
        data: DataEcho {
            dataset: &source,
            split,
        },
        config: &config,
    };
    write_manifest(&args.out, "train", config.seed, &echo)?;
    let data = load(&source, split)?;
    write_cache(&args.out, &data)?;
    let init = initial_params(&config, data.train.dim());
    write_params(&args.out.join("params_init.json"), &init)?;
    let mut sampler = Sampler::new(config.backend.clone())?;
    let (params, history) = train_with(&data.train, &config, init, &mut sampler)?;
    history.write_csv(create(&args.out.join("history.csv"))?)?;
    write_params(&args.out.join("params_final.json"), &params)?;
    if let (Some(first), Some(last)) = (history.records.first(), history.records.last()) {
        log::info!(
            "loss {:.6} -> {:.6} over {} iterations",
            first.loss,
            last.loss,
            history.records.len()
        );
    }
    Ok(())
}

fn load_or_init(
    path: Option<&Path>,
    untrained_dim: Option<usize>,
    seed: u64,
    n_visible: usize,
    n_hidden: usize,
) -> CliResult<SpectralModelParams> {
    match (path, untrained_dim) {
        (Some(p), _) => read_params(p),
        (None, Some(d)) => {
            let config = TrainConfig {
                seed,
                n_visible,
                n_hidden,
                ..TrainConfig::default()
            };
            Ok(initial_params(&config, d))
        }
        (None, None) => Err(CliError::Usage("no parameters given".into())),
    }
}

#[derive(Serialize)]
struct EvaluateEcho<'a> {
    #[serde(flatten)]
    data: DataEcho<'a>,
    params: Option<&'a PathBuf>,
    stage: &'a str,
    s_list: &'a [usize],
    repeats: u64,
    llr_endpoints: bool,
    eps: f64,
    backend: &'a SamplerBackend,
}

#[derive(Serialize)]
struct EvaluationOutput<'a> {
    dataset: &'a str,
    stage: &'a str,
    rows: &'a [EvaluationRow],
    summary: &'a [SeedSummary],
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    if args.s_list.is_empty() || args.s_list.contains(&0) {
        return Err(CliError::Usage("--s-list needs positive values".into()));
    }
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    if args.params.is_none() && !args.untrained {
        return Err(CliError::Usage(
            "--params is required unless --untrained is given".into(),
        ));
    }
    let source = resolve_source(&args.data, args.seed)?;
    let split = split_spec(&args.data, args.seed);
    let backend = backend_from(&args.sampler, SamplerBackend::Exact)?;
    let stage = if args.untrained { "untrained" } else { "trained" };
    let echo = EvaluateEcho {
        data: DataEcho {
            dataset: &source,
            split,
        },
        params: args.params.as_ref(),
        stage,
        s_list: &args.s_list,
        repeats: args.repeats,
        llr_endpoints: args.llr_endpoints,
        eps: args.eps,
        backend: &backend,
    };
    write_manifest(&args.out, "evaluate", args.seed, &echo)?;
    let data = load(&source, split)?;
    let params = load_or_init(
        args.params.as_deref(),
        Some(data.train.dim()),
        args.seed,
        args.n_visible,
        args.n_hidden,
    )?;
    let mut sampler = Sampler::new(backend)?;
    let mut rows = Vec::new();
    for &s in &args.s_list {
        for r in 0..args.repeats {
            let seed = args.seed + r;
            rows.extend(evaluate_at(
                &data.descriptor.name,
                &params,
                &data.train,
                &data.test,
                s,
                &mut sampler,
                args.eps,
                seed,
            )?);
        }
    }
    if !args.llr_endpoints {
        rows.retain(|r| r.method == Method::Klnw);
    }
    let summary = summarize(&rows);
    write_csv_rows(&args.out.join(format!("results_{stage}.csv")), &rows)?;
    write_csv_rows(&args.out.join(format!("results_{stage}_summary.csv")), &summary)?;
    write_json(
        &args.out.join(format!("results_{stage}.json")),
        &EvaluationOutput {
            dataset: &data.descriptor.name,
            stage,
            rows: &rows,
            summary: &summary,
        },
    )
}

#[derive(Serialize)]
struct BaselineOutput<'a> {
    dataset: &'a str,
    #[serde(flatten)]
    report: &'a boltzkern::data::BaselineReport,
}

pub fn baseline(args: &BaselineArgs) -> CliResult<()> {
    let grid = args.gammas.clone().unwrap_or_else(default_gamma_grid);
    let source = resolve_source(&args.data, args.seed)?;
    let split = split_spec(&args.data, args.seed);
    write_manifest(
        &args.out,
        "baseline",
        args.seed,
        &DataEcho {
            dataset: &source,
            split,
        },
    )?;
    let data = load(&source, split)?;
    let report = gaussian_nw_baseline(&data.train, &data.test, &grid, args.eps)?;
    write_json(
        &args.out.join("baseline.json"),
        &BaselineOutput {
            dataset: &data.descriptor.name,
            report: &report,
        },
    )
}

/// Per-coordinate histogram row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub coordinate: usize,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// `bins` equal-width bins over each coordinate's observed range; the last bin is closed.
pub fn histogram(freqs: &FrequencySet, bins: usize) -> Vec<HistogramBin> {
    let mut out = Vec::with_capacity(freqs.dim() * bins);
    for (k, col) in freqs.omegas().columns().into_iter().enumerate() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &v in col {
            let b = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
            counts[b.min(bins - 1)] += 1;
        }
        for (b, count) in counts.into_iter().enumerate() {
            out.push(HistogramBin {
                coordinate: k,
                bin: b,
                lower: lo + b as f64 * width,
                upper: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
                count,
            });
        }
    }
    out
}

#[derive(Serialize)]
struct SpectrumEcho<'a> {
    params: Option<&'a PathBuf>,
    untrained_dim: Option<usize>,
    samples: usize,
    bins: usize,
    backend: &'a SamplerBackend,
}

pub fn sample_spectrum(args: &SpectrumArgs) -> CliResult<()> {
    if args.samples == 0 || args.bins == 0 {
        return Err(CliError::Usage("sample and bin counts must be positive".into()));
    }
    if args.params.is_some() == args.untrained_dim.is_some() {
        return Err(CliError::Usage(
            "give exactly one of --params and --untrained-dim".into(),
        ));
    }
    let backend = backend_from(&args.sampler, SamplerBackend::Exact)?;
    let echo = SpectrumEcho {
        params: args.params.as_ref(),
        untrained_dim: args.untrained_dim,
        samples: args.samples,
        bins: args.bins,
        backend: &backend,
    };
    write_manifest(&args.out, "sample-spectrum", args.seed, &echo)?;
    let params = load_or_init(
        args.params.as_deref(),
        args.untrained_dim,
        args.seed,
        args.n_visible,
        args.n_hidden,
    )?;
    let mut sampler = Sampler::new(backend)?;
    let freqs = draw_frequencies(&params, args.samples, &mut sampler, &mut derived_rng(args.seed, 0))?;
    freqs.write_csv(create(&args.out.join("spectrum.csv"))?)?;
    write_csv_rows(&args.out.join("spectrum_hist.csv"), &histogram(&freqs, args.bins))
}

#[derive(Serialize)]
struct KernelDumpEcho<'a> {
    #[serde(flatten)]
    data: DataEcho<'a>,
    params_pre: Option<&'a PathBuf>,
    params_post: Option<&'a PathBuf>,
    samples: usize,
    backend: &'a SamplerBackend,
}

pub fn kernel_dump(args: &KernelDumpArgs) -> CliResult<()> {
    let pre = args
        .params_pre
        .clone()
        .or_else(|| args.run.as_ref().map(|r| r.join("params_init.json")));
    let post = args
        .params_post
        .clone()
        .or_else(|| args.run.as_ref().map(|r| r.join("params_final.json")));
    if pre.is_none() && post.is_none() {
        return Err(CliError::Usage(
            "give --run or at least one of --params-pre/--params-post".into(),
        ));
    }
    if args.samples == 0 {
        return Err(CliError::Usage("sample count must be positive".into()));
    }
    let source = resolve_source(&args.data, args.seed)?;
    let split = split_spec(&args.data, args.seed);
    let backend = backend_from(&args.sampler, SamplerBackend::Exact)?;
    let echo = KernelDumpEcho {
        data: DataEcho {
            dataset: &source,
            split,
        },
        params_pre: pre.as_ref(),
        params_post: post.as_ref(),
        samples: args.samples,
        backend: &backend,
    };
    write_manifest(&args.out, "kernel-dump", args.seed, &echo)?;
    let data = load(&source, split)?;
    let mut sampler = Sampler::new(backend)?;
    for (tag, path) in [("pre", pre), ("post", post)] {
        let Some(path) = path else { continue };
        let params = read_params(&path)?;
        if params.n_omega() != data.train.dim() {
            return Err(boltzkern::Error::Shape {
                context: "parameter frequency dimension vs dataset features",
                expected: data.train.dim(),
                actual: params.n_omega(),
            }
            .into());
        }
        let freqs = draw_frequencies(&params, args.samples, &mut sampler, &mut derived_rng(args.seed, 0))?;
        let k = kernel_matrix(data.train.x.view(), &freqs)?;
        k.write_csv(create(&args.out.join(format!("kernel_{tag}.csv")))?)?;
    }
    Ok(())
}

pub fn serve_sampler(args: &ServeArgs) -> CliResult<()> {
    let served = serve_exact(
        std::io::stdin().lock(),
        std::io::stdout().lock(),
        &mut derived_rng(args.seed, 0),
    )?;
    log::info!("served {served} requests");
    Ok(())
}
