//! Command-line interface: chain sampling, replication studies, the
//! random-walk regeneration feasibility table, exact bound curves, and
//! autocorrelation exports. Every CSV starts with a comment line recording
//! the invocation.

use clap::{Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use vamh::bounds::{self, DiscreteInstance, KernelKind};
use vamh::chain::{self, ChainState, Kernel};
use vamh::error::{Error, Result};
use vamh::stream::RandomStream;
use vamh::study::{self, StudyConfig};
use vamh::{acf, glmm, toy};

#[derive(Parser)]
#[command(name = "vamh", version, about = "Variable-at-a-time Metropolis-Hastings toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliModel {
    Toy,
    Glmm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliSampler {
    Mhis,
    Cwis,
    Rw,
    Mix,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliKind {
    Composition,
    Mixing,
    Cwis,
    #[value(name = "single-block")]
    SingleBlock,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write its trace.
    Sample {
        #[arg(long, value_enum)]
        model: CliModel,
        #[arg(long, value_enum)]
        sampler: CliSampler,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Optional model configuration file (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a replication study from a JSON configuration.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random-walk regeneration feasibility table.
    Feasibility {
        /// GLMM model configuration file (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact TV curve of a discrete instance against the closed-form bound.
    Bounds {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        kind: CliKind,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        out: PathBuf,
        /// Start state index; the curve maximizes over starts when omitted.
        #[arg(long)]
        start: Option<usize>,
    },
    /// Sample autocorrelation of a trace file.
    Acf {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        max_lag: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Sample { model, sampler, n, seed, out, config } => {
            sample(model, sampler, n, seed, &out, config.as_deref())
        }
        Command::Study { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg: StudyConfig =
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("study config: {e}")))?;
            let outcome = study::run_study(&cfg)?;
            let comment = format!(
                "vamh study config={} seed={}",
                serde_json::to_string(&cfg).expect("config serializes"),
                cfg.seed
            );
            study::write_study_csv(BufWriter::new(File::create(&out)?), &comment, &outcome)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("summary serializes")
            );
            Ok(())
        }
        Command::Feasibility { config, out, steps, seed } => {
            let cfg: glmm::GlmmConfig = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .map_err(|e| Error::Parse(format!("glmm config: {e}")))?,
                None => glmm::GlmmConfig::default(),
            };
            let model = cfg.build()?;
            let mut cal_rng = RandomStream::new(seed, vamh::stream::STREAM_CALIBRATION);
            let calibration = glmm::calibrate(&model, study::GLMM_CALIBRATION_STEPS, &mut cal_rng)?;
            let outcome = study::run_feasibility_study(
                &model,
                &calibration,
                cfg.tau2(),
                &cfg.b_multipliers,
                steps,
                seed,
            )?;
            let comment = format!(
                "vamh feasibility config={} steps={steps} seed={seed}",
                serde_json::to_string(&cfg).expect("config serializes")
            );
            study::write_feasibility_csv(BufWriter::new(File::create(&out)?), &comment, &outcome)?;
            for row in &outcome.rows {
                println!(
                    "b={:>4} SD: fraction={:.6} mean_nonzero={:.3e} expected_regens={:.3e}",
                    row.multiplier,
                    row.fraction_inside,
                    row.mean_nonzero_factor,
                    row.expected_regenerations
                );
            }
            Ok(())
        }
        Command::Bounds { instance, kind, n, out, start } => bounds_cmd(&instance, kind, n, &out, start),
        Command::Acf { input, max_lag, out } => {
            let g = read_trace_g(&input)?;
            let acf = acf::sample_acf(&g, max_lag)?;
            let mut w = BufWriter::new(File::create(&out)?);
            use std::io::Write;
            writeln!(w, "# vamh acf in={} max_lag={max_lag}", input.display())?;
            writeln!(w, "lag,acf")?;
            for (k, v) in acf.iter().enumerate() {
                writeln!(w, "{k},{v}")?;
            }
            Ok(())
        }
    }
}

fn sample(
    model: CliModel,
    sampler: CliSampler,
    n: u64,
    seed: u64,
    out: &std::path::Path,
    config: Option<&std::path::Path>,
) -> Result<()> {
    let mut rng = RandomStream::new(seed, 0);
    let mut rows: Vec<(usize, f64, Vec<bool>)> = Vec::with_capacity(n as usize);
    let comment;

    match model {
        CliModel::Toy => {
            let cfg: toy::ToyConfig = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                    .map_err(|e| Error::Parse(format!("toy config: {e}")))?,
                None => match sampler {
                    // single-block default keeps theta unbounded below
                    CliSampler::Mhis => toy::ToyConfig {
                        b: (0.0, toy::UpperBound::Inf(toy::InfTag::Inf)),
                        ..toy::ToyConfig::default()
                    },
                    _ => toy::ToyConfig::default(),
                },
            };
            let m = cfg.model()?;
            comment = format!(
                "vamh sample model=toy sampler={} n={n} seed={seed} config={}",
                sampler_name(sampler),
                serde_json::to_string(&cfg).expect("config serializes")
            );
            let mut state = ChainState::new(&m, toy::INITIAL_STATE.to_vec())?;
            let proposals = toy::component_proposals(&m);
            let weights = vec![0.5, 0.5];
            let block = toy::ToyBlockProposal { model: m };
            let kernel = match sampler {
                CliSampler::Mhis => Kernel::SingleBlock(&block),
                CliSampler::Cwis => Kernel::Composition(&proposals),
                CliSampler::Mix => Kernel::Mixing(&proposals, &weights),
                CliSampler::Rw => {
                    return Err(Error::Config(
                        "the toy model has no random-walk sampler; use mhis, cwis or mix".into(),
                    ))
                }
            };
            chain::run_chain_with(
                &m,
                &kernel,
                &mut state,
                n as usize,
                |x| x[0] / x[1].sqrt(),
                &mut rng,
                |step, _st, flags| rows.push((step, 0.0, flags.to_vec())),
            )
            .map(|trace| {
                for (row, g) in rows.iter_mut().zip(&trace.g) {
                    row.1 = *g;
                }
                trace
            })?;
        }
        CliModel::Glmm => {
            let cfg: glmm::GlmmConfig = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                    .map_err(|e| Error::Parse(format!("glmm config: {e}")))?,
                None => glmm::GlmmConfig::default(),
            };
            let m = cfg.build()?;
            comment = format!(
                "vamh sample model=glmm sampler={} n={n} seed={seed} config={}",
                sampler_name(sampler),
                serde_json::to_string(&cfg).expect("config serializes")
            );
            let mut init_rng = rng.substream(vamh::stream::TAG_INIT);
            let init: Vec<f64> = (0..m.q).map(|_| init_rng.normal(0.0, m.sigma2.sqrt())).collect();
            let mut state = ChainState::new(&m, init)?;
            let proposals = glmm::component_proposals(&m);
            let weights = vec![1.0 / m.q as f64; m.q];
            let block = glmm::GlmmBlockProposal { q: m.q, sigma2: m.sigma2 };
            let rw = glmm::GlmmRwProposal { tau2: cfg.tau2() };
            let kernel = match sampler {
                CliSampler::Mhis => Kernel::SingleBlock(&block),
                CliSampler::Rw => Kernel::SingleBlock(&rw),
                CliSampler::Cwis => Kernel::Composition(&proposals),
                CliSampler::Mix => Kernel::Mixing(&proposals, &weights),
            };
            chain::run_chain_with(
                &m,
                &kernel,
                &mut state,
                n as usize,
                |u| m.q_functional(u),
                &mut rng,
                |step, _st, flags| rows.push((step, 0.0, flags.to_vec())),
            )
            .map(|trace| {
                for (row, g) in rows.iter_mut().zip(&trace.g) {
                    row.1 = *g;
                }
                trace
            })?;
        }
    }

    chain::write_trace_csv(BufWriter::new(File::create(out)?), &comment, &rows)?;
    Ok(())
}

fn sampler_name(s: CliSampler) -> &'static str {
    match s {
        CliSampler::Mhis => "mhis",
        CliSampler::Cwis => "cwis",
        CliSampler::Rw => "rw",
        CliSampler::Mix => "mix",
    }
}

fn bounds_cmd(
    instance: &std::path::Path,
    kind: CliKind,
    n: u32,
    out: &std::path::Path,
    start: Option<usize>,
) -> Result<()> {
    let inst: DiscreteInstance = serde_json::from_str(&std::fs::read_to_string(instance)?)
        .map_err(|e| Error::Parse(format!("instance file: {e}")))?;
    inst.validate()?;
    let kernel_kind = match kind {
        CliKind::Composition => KernelKind::Composition,
        CliKind::Mixing => KernelKind::Mixing,
        CliKind::Cwis => KernelKind::Cwis,
        CliKind::SingleBlock => KernelKind::SingleBlockIndependence,
    };
    let kernel = bounds::exact_kernel_matrix(&inst, kernel_kind)?;
    let curve = match start {
        Some(s) => bounds::exact_tv_curve(&inst, &kernel, n, s)?,
        None => bounds::exact_tv_curve_sup(&inst, &kernel, n)?,
    };

    // Closed-form bound matching the requested kind.
    let d = inst.component_count() as u32;
    let bound_at: Box<dyn Fn(u32) -> Result<f64>> = match kernel_kind {
        KernelKind::Composition => {
            let c = bounds::composition_minorization_constant(&inst)?;
            Box::new(move |k| bounds::tv_bound_composition(&[1.0], c, k))
        }
        KernelKind::Cwis => {
            let (delta, eps) = bounds::cwis_bound_constants(&inst)?;
            Box::new(move |k| bounds::tv_bound_cwis(delta, eps, d, k))
        }
        KernelKind::Mixing => {
            let comp = bounds::exact_kernel_matrix(&inst, KernelKind::Composition)?;
            let eps = bounds::kernel_minorization_constant(&comp);
            let weights = inst.mixing_weights();
            Box::new(move |k| bounds::tv_bound_mixing(eps, &weights, k))
        }
        KernelKind::SingleBlockIndependence => {
            let (delta, _) = bounds::cwis_bound_constants(&inst)?;
            Box::new(move |k| Ok((1.0 - delta).powi(k as i32)))
        }
    };

    let mut w = BufWriter::new(File::create(out)?);
    use std::io::Write;
    writeln!(
        w,
        "# vamh bounds instance={} kind={:?} n={n} start={start:?}",
        instance.display(),
        kernel_kind
    )?;
    if kernel_kind == KernelKind::Mixing {
        // The mixing bound holds per sweep of d raw steps; report both
        // indices.
        writeln!(w, "n,tv_exact,tv_bound,raw_step")?;
        let sweeps = n / d;
        let per_sweep = bounds::mat_pow(&kernel, d);
        let curve = match start {
            Some(s) => bounds::exact_tv_curve(&inst, &per_sweep, sweeps, s)?,
            None => bounds::exact_tv_curve_sup(&inst, &per_sweep, sweeps)?,
        };
        for (i, tv) in curve.iter().enumerate() {
            let k = i as u32 + 1;
            writeln!(w, "{k},{tv},{},{}", bound_at(k)?, k * d)?;
        }
    } else {
        writeln!(w, "n,tv_exact,tv_bound")?;
        for (i, tv) in curve.iter().enumerate() {
            let k = i as u32 + 1;
            writeln!(w, "{k},{tv},{}", bound_at(k)?)?;
        }
    }
    Ok(())
}

fn read_trace_g(path: &std::path::Path) -> Result<Vec<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut g = Vec::new();
    let mut g_col: Option<usize> = None;
    for line in reader.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match g_col {
            None => {
                g_col = Some(
                    fields
                        .iter()
                        .position(|&f| f.trim() == "g")
                        .ok_or_else(|| Error::Parse("trace file has no g column".into()))?,
                );
            }
            Some(col) => {
                let field = fields.get(col).ok_or_else(|| {
                    Error::Parse(format!("row with {} fields, expected > {col}", fields.len()))
                })?;
                g.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad g value {field:?}: {e}")))?,
                );
            }
        }
    }
    if g.is_empty() {
        return Err(Error::Parse("trace file has no data rows".into()));
    }
    Ok(g)
}
