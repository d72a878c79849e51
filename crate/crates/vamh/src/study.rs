//! Replication harness: coverage studies of the tour-based confidence
//! intervals, and the random-walk regeneration feasibility experiment.

use crate::chain::{mh_step, ChainState, ComponentProposal};
use crate::error::{Error, Result};
use crate::glmm::{self, GlmmCalibration, GlmmConfig, GlmmModel};
use crate::regen::{
    collect_tours, mty_regen_prob, rs_confidence_interval, split_sweep, MinorizationSpec, Tour,
};
use crate::stream::{RandomStream, STREAM_CALIBRATION, STREAM_REFERENCE, TAG_DELTA, TAG_INIT};
use crate::toy::{self, ToyConfig, ToyModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Calibration preliminary-run length.
pub const CALIBRATION_STEPS: usize = 10_000;
/// Preliminary-run length for the GLMM constants (means, spreads, medians).
pub const GLMM_CALIBRATION_STEPS: usize = 100_000;
/// Step budget per replication in fixed-regeneration designs.
pub const FIXED_R_BUDGET: u64 = 100_000_000;
/// Default length of the long reference run that supplies the GLMM truth.
pub const DEFAULT_REFERENCE_STEPS: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Toy,
    Glmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Mhis,
    Cwis,
    Rw,
    Mix,
}

/// Replication design: a fixed chain length, or a fixed number of tours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    FixedN(u64),
    FixedR(u64),
}

/// Where the coverage truth comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", untagged)]
pub enum TruthSpec {
    Named(NamedTruth),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedTruth {
    /// Quadrature oracle (toy model).
    Quadrature,
    /// Long reference run (GLMM).
    Reference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub model: ModelKind,
    /// Inline model configuration; model defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_config: Option<serde_json::Value>,
    pub sampler: SamplerKind,
    pub design: Design,
    pub replications: u64,
    #[serde(default = "default_level")]
    pub confidence_level: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_truth")]
    pub truth: TruthSpec,
    /// Length of the reference run when `truth = "reference"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_steps: Option<u64>,
    /// Hypercube half-width multiplier for random-walk regeneration.
    #[serde(default = "default_rw_multiplier")]
    pub rw_b_multiplier: f64,
}

fn default_level() -> f64 {
    0.95
}
fn default_truth() -> TruthSpec {
    TruthSpec::Named(NamedTruth::Quadrature)
}
fn default_rw_multiplier() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicationStatus {
    Ok,
    TooFewTours,
    BudgetExceeded,
}

/// One replication's outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRecord {
    pub replication: u64,
    pub estimate: f64,
    pub half_width: f64,
    pub covered: bool,
    pub tours: u64,
    pub chain_length: u64,
    pub mean_tour_length: f64,
    pub status: ReplicationStatus,
}

/// Study-level aggregate, one row per study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySummary {
    pub replications: u64,
    pub used: u64,
    pub excluded: u64,
    pub truth: f64,
    /// Monte Carlo standard error of the reference truth when one was run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_mcse: Option<f64>,
    pub mean_half_width: f64,
    pub sd_half_width: f64,
    pub coverage_rate: f64,
    pub coverage_se: f64,
    pub mean_tours: f64,
    pub sd_tours: f64,
    pub mean_chain_length: f64,
    pub sd_chain_length: f64,
    /// Overall mean tour length: total toured steps over total tours.
    pub mean_tour_length: f64,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub records: Vec<StudyRecord>,
    pub summary: StudySummary,
}

// ---------------------------------------------------------------------------
// Split-chain runners.

/// Streaming tour accumulator matching `collect_tours` semantics.
#[derive(Debug, Default, Clone)]
pub struct TourCollector {
    started: bool,
    cur_len: u64,
    cur_sum: f64,
    pub tours: Vec<Tour>,
    pub steps: u64,
    pub last_marker_step: u64,
    pub first_marker_step: u64,
}

impl TourCollector {
    pub fn push(&mut self, g: f64, delta: bool) {
        self.steps += 1;
        if delta {
            if self.started {
                self.tours.push(Tour { length: self.cur_len, sum: self.cur_sum });
            } else {
                self.first_marker_step = self.steps;
            }
            self.started = true;
            self.cur_len = 0;
            self.cur_sum = 0.0;
            self.last_marker_step = self.steps;
        }
        if self.started {
            self.cur_len += 1;
            self.cur_sum += g;
        }
    }
}

enum Runner<'a> {
    ToyCwis {
        model: &'a ToyModel,
        proposals: Vec<Box<dyn ComponentProposal>>,
        spec: MinorizationSpec,
        state: ChainState,
    },
    ToyMhis {
        model: &'a ToyModel,
        proposal: toy::ToyBlockProposal,
        log_c: f64,
        state: ChainState,
        last_ratio: f64,
    },
    GlmmCwis {
        model: &'a GlmmModel,
        proposals: Vec<Box<dyn ComponentProposal>>,
        spec: MinorizationSpec,
        state: ChainState,
    },
    GlmmMhis {
        model: &'a GlmmModel,
        proposal: glmm::GlmmBlockProposal,
        log_c: f64,
        state: ChainState,
        last_ratio: f64,
    },
    GlmmRw {
        model: &'a GlmmModel,
        proposal: glmm::GlmmRwProposal,
        center: &'a [f64],
        half_widths: Vec<f64>,
        tau2: f64,
        log_c_pi: f64,
        state: ChainState,
    },
}

impl Runner<'_> {
    /// One split-chain step; returns `(g, delta)`.
    fn step(&mut self, rng: &mut RandomStream, delta_rng: &mut RandomStream) -> Result<(f64, bool)> {
        match self {
            Runner::ToyCwis { model, proposals, spec, state } => {
                let out = split_sweep(*model, proposals, spec, state, rng, delta_rng)?;
                let x = state.x();
                Ok((x[0] / x[1].sqrt(), out.delta))
            }
            Runner::ToyMhis { model, proposal, log_c, state, last_ratio } => {
                let out = mh_step(*model, state, proposal, rng)?;
                let delta = if out.accepted {
                    let prev = *last_ratio;
                    *last_ratio = model.log_w(state.x()[0], state.x()[1]);
                    delta_rng.uniform() < mty_regen_prob(prev, *last_ratio, *log_c)
                } else {
                    false
                };
                let x = state.x();
                Ok((x[0] / x[1].sqrt(), delta))
            }
            Runner::GlmmCwis { model, proposals, spec, state } => {
                let out = split_sweep(*model, proposals, spec, state, rng, delta_rng)?;
                Ok((model.q_functional(state.x()), out.delta))
            }
            Runner::GlmmMhis { model, proposal, log_c, state, last_ratio } => {
                let out = mh_step(*model, state, proposal, rng)?;
                let delta = if out.accepted {
                    let prev = *last_ratio;
                    *last_ratio = model.log_r(state.x());
                    delta_rng.uniform() < mty_regen_prob(prev, *last_ratio, *log_c)
                } else {
                    false
                };
                Ok((model.q_functional(state.x()), delta))
            }
            Runner::GlmmRw {
                model,
                proposal,
                center,
                half_widths,
                tau2,
                log_c_pi,
                state,
            } => {
                let prev = state.x().to_vec();
                let out = mh_step(*model, state, proposal, rng)?;
                let delta = if out.accepted {
                    let p = glmm::glmm_rw_regen_prob(
                        model,
                        &prev,
                        state.x(),
                        center,
                        half_widths,
                        *tau2,
                        *log_c_pi,
                    );
                    p > 0.0 && delta_rng.uniform() < p
                } else {
                    false
                };
                Ok((model.q_functional(state.x()), delta))
            }
        }
    }
}

/// Per-study constants shared by every replication.
pub enum Prepared {
    Toy {
        model: ToyModel,
        /// Cutoff of the component-wise split chain.
        theta_tilde: f64,
        /// Independence-sampler regeneration constant.
        log_c: f64,
        sampler: SamplerKind,
    },
    Glmm {
        model: GlmmModel,
        calibration: GlmmCalibration,
        tau2: f64,
        rw_b_multiplier: f64,
        sampler: SamplerKind,
    },
}

impl Prepared {
    fn runner(&self, rep_rng: &mut RandomStream) -> Result<Runner<'_>> {
        match self {
            Prepared::Toy { model, theta_tilde, log_c, sampler } => match sampler {
                SamplerKind::Cwis => Ok(Runner::ToyCwis {
                    model,
                    proposals: toy::component_proposals(model),
                    spec: toy::toy_minorization_spec(model, *theta_tilde)?,
                    state: ChainState::new(model, toy::INITIAL_STATE.to_vec())?,
                }),
                SamplerKind::Mhis => {
                    let state = ChainState::new(model, toy::INITIAL_STATE.to_vec())?;
                    let last_ratio = model.log_w(state.x()[0], state.x()[1]);
                    Ok(Runner::ToyMhis {
                        model,
                        proposal: toy::ToyBlockProposal { model: *model },
                        log_c: *log_c,
                        state,
                        last_ratio,
                    })
                }
                _ => Err(Error::Config(
                    "regenerative studies support mhis and cwis on the toy model".into(),
                )),
            },
            Prepared::Glmm { model, calibration, tau2, rw_b_multiplier, sampler } => {
                let mut init_rng = rep_rng.substream(TAG_INIT);
                let init: Vec<f64> = (0..model.q)
                    .map(|_| init_rng.normal(0.0, model.sigma2.sqrt()))
                    .collect();
                let state = ChainState::new(model, init)?;
                match sampler {
                    SamplerKind::Cwis => Ok(Runner::GlmmCwis {
                        model,
                        proposals: glmm::component_proposals(model),
                        spec: glmm::glmm_minorization_spec(model, &calibration.log_c)?,
                        state,
                    }),
                    SamplerKind::Mhis => {
                        let last_ratio = model.log_r(state.x());
                        Ok(Runner::GlmmMhis {
                            model,
                            proposal: glmm::GlmmBlockProposal { q: model.q, sigma2: model.sigma2 },
                            log_c: calibration.log_c_r,
                            state,
                            last_ratio,
                        })
                    }
                    SamplerKind::Rw => Ok(Runner::GlmmRw {
                        model,
                        proposal: glmm::GlmmRwProposal { tau2: *tau2 },
                        center: &calibration.u_mean,
                        half_widths: calibration
                            .u_sd
                            .iter()
                            .map(|s| s * rw_b_multiplier)
                            .collect(),
                        tau2: *tau2,
                        log_c_pi: calibration.log_c_pi,
                        state,
                    }),
                    SamplerKind::Mix => Err(Error::Config(
                        "regeneration is not implemented for mixing kernels".into(),
                    )),
                }
            }
        }
    }
}

/// Builds the per-study constants (model, calibrations) from a config.
pub fn prepare(config: &StudyConfig) -> Result<Prepared> {
    match config.model {
        ModelKind::Toy => {
            let toy_cfg: ToyConfig = match &config.model_config {
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| Error::Parse(format!("toy model config: {e}")))?,
                None => ToyConfig::default(),
            };
            let model = toy_cfg.model()?;
            let mut cal_rng = RandomStream::new(config.seed, STREAM_CALIBRATION);
            let theta_tilde = match (config.sampler, toy_cfg.theta_tilde.value()) {
                (SamplerKind::Cwis, Some(v)) => v,
                (SamplerKind::Cwis, None) => {
                    toy::calibrate_theta_tilde(&model, CALIBRATION_STEPS, &mut cal_rng)?
                }
                // unused by the other samplers; any in-support value will do
                _ => toy_cfg
                    .theta_tilde
                    .value()
                    .unwrap_or(model.b.0.max(0.01) + 0.49),
            };
            let log_c = match toy_cfg.c.value() {
                Some(v) => v.ln(),
                None => toy::calibrate_mty_log_c(&model, CALIBRATION_STEPS, &mut cal_rng)?,
            };
            Ok(Prepared::Toy { model, theta_tilde, log_c, sampler: config.sampler })
        }
        ModelKind::Glmm => {
            let glmm_cfg: GlmmConfig = match &config.model_config {
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| Error::Parse(format!("glmm model config: {e}")))?,
                None => GlmmConfig::default(),
            };
            let model = glmm_cfg.build()?;
            let mut cal_rng = RandomStream::new(config.seed, STREAM_CALIBRATION);
            let calibration = glmm::calibrate(&model, GLMM_CALIBRATION_STEPS, &mut cal_rng)?;
            Ok(Prepared::Glmm {
                tau2: glmm_cfg.tau2(),
                rw_b_multiplier: config.rw_b_multiplier,
                model,
                calibration,
                sampler: config.sampler,
            })
        }
    }
}

/// Resolves the coverage truth. For the GLMM reference truth this runs a
/// long component-wise chain on a dedicated stream and reports its own
/// Monte Carlo standard error.
pub fn resolve_truth(config: &StudyConfig, prepared: &Prepared) -> Result<(f64, Option<f64>)> {
    match (config.truth, prepared) {
        (TruthSpec::Value(v), _) => Ok((v, None)),
        (TruthSpec::Named(NamedTruth::Quadrature), Prepared::Toy { model, .. }) => {
            Ok((toy::oracle_posterior_mean_icv(model)?, None))
        }
        (TruthSpec::Named(NamedTruth::Reference), Prepared::Glmm { model, calibration, .. }) => {
            let steps = config.reference_steps.unwrap_or(DEFAULT_REFERENCE_STEPS);
            let mut rng = RandomStream::new(config.seed, STREAM_REFERENCE);
            let mut delta_rng = rng.substream(TAG_DELTA);
            let proposals = glmm::component_proposals(model);
            let spec = glmm::glmm_minorization_spec(model, &calibration.log_c)?;
            let mut init_rng = rng.substream(TAG_INIT);
            let init: Vec<f64> = (0..model.q)
                .map(|_| init_rng.normal(0.0, model.sigma2.sqrt()))
                .collect();
            let mut state = ChainState::new(model, init)?;
            let mut collector = TourCollector::default();
            for _ in 0..steps {
                let out = split_sweep(model, &proposals, &spec, &mut state, &mut rng, &mut delta_rng)?;
                collector.push(model.q_functional(state.x()), out.delta);
            }
            let est = rs_confidence_interval(&collector.tours, 0.95)?;
            Ok((est.g_bar, Some(est.half_width / crate::regen::Z_975)))
        }
        (TruthSpec::Named(NamedTruth::Quadrature), Prepared::Glmm { .. }) => Err(Error::Config(
            "the quadrature truth applies to the toy model; use \"reference\" or a number".into(),
        )),
        (TruthSpec::Named(NamedTruth::Reference), Prepared::Toy { .. }) => Err(Error::Config(
            "the reference truth applies to the glmm model; use \"quadrature\" or a number".into(),
        )),
    }
}

fn one_replication(
    prepared: &Prepared,
    config: &StudyConfig,
    truth: f64,
    rep: u64,
) -> Result<StudyRecord> {
    let mut rng = RandomStream::new(config.seed, rep);
    let mut delta_rng = rng.substream(TAG_DELTA);
    let mut runner = prepared.runner(&mut rng)?;
    let mut collector = TourCollector::default();

    let (chain_length, status) = match config.design {
        Design::FixedN(n) => {
            for _ in 0..n {
                let (g, delta) = runner.step(&mut rng, &mut delta_rng)?;
                collector.push(g, delta);
            }
            let status = if collector.tours.len() < 2 {
                ReplicationStatus::TooFewTours
            } else {
                ReplicationStatus::Ok
            };
            (n, status)
        }
        Design::FixedR(r) => {
            let mut status = ReplicationStatus::BudgetExceeded;
            while collector.steps < FIXED_R_BUDGET {
                let (g, delta) = runner.step(&mut rng, &mut delta_rng)?;
                collector.push(g, delta);
                if collector.tours.len() as u64 >= r {
                    status = ReplicationStatus::Ok;
                    break;
                }
            }
            (collector.last_marker_step, status)
        }
    };

    let tours = &collector.tours;
    if tours.len() < 2 || status != ReplicationStatus::Ok {
        return Ok(StudyRecord {
            replication: rep,
            estimate: f64::NAN,
            half_width: f64::NAN,
            covered: false,
            tours: tours.len() as u64,
            chain_length,
            mean_tour_length: f64::NAN,
            status: if status == ReplicationStatus::Ok {
                ReplicationStatus::TooFewTours
            } else {
                status
            },
        });
    }
    let est = rs_confidence_interval(tours, config.confidence_level)?;
    let toured: u64 = tours.iter().map(|t| t.length).sum();
    Ok(StudyRecord {
        replication: rep,
        estimate: est.g_bar,
        half_width: est.half_width,
        covered: (est.g_bar - truth).abs() <= est.half_width,
        tours: tours.len() as u64,
        chain_length,
        mean_tour_length: toured as f64 / tours.len() as f64,
        status: ReplicationStatus::Ok,
    })
}

/// Runs the full replication study described by `config`.
pub fn run_study(config: &StudyConfig) -> Result<StudyOutcome> {
    let prepared = prepare(config)?;
    let (truth, reference_mcse) = resolve_truth(config, &prepared)?;
    run_study_prepared(config, &prepared, truth, reference_mcse)
}

/// Runs the replications against an already-prepared study.
pub fn run_study_prepared(
    config: &StudyConfig,
    prepared: &Prepared,
    truth: f64,
    reference_mcse: Option<f64>,
) -> Result<StudyOutcome> {
    if config.replications == 0 {
        return Err(Error::Config("at least one replication required".into()));
    }
    let run_all = || -> Result<Vec<StudyRecord>> {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| one_replication(prepared, config, truth, rep))
            .collect()
    };
    let records = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run_all),
        None => run_all(),
    }?;

    let summary = summarize(&records, truth, reference_mcse);
    Ok(StudyOutcome { records, summary })
}

fn summarize(records: &[StudyRecord], truth: f64, reference_mcse: Option<f64>) -> StudySummary {
    let used: Vec<&StudyRecord> = records
        .iter()
        .filter(|r| r.status == ReplicationStatus::Ok)
        .collect();
    let n = used.len() as f64;
    let mean_sd = |f: &dyn Fn(&StudyRecord) -> f64| -> (f64, f64) {
        if used.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = used.iter().map(|r| f(r)).sum::<f64>() / n;
        let var = used.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    };
    let (mean_half_width, sd_half_width) = mean_sd(&|r| r.half_width);
    let (mean_tours, sd_tours) = mean_sd(&|r| r.tours as f64);
    let (mean_chain_length, sd_chain_length) = mean_sd(&|r| r.chain_length as f64);
    let covered = used.iter().filter(|r| r.covered).count() as f64;
    let coverage_rate = if used.is_empty() { f64::NAN } else { covered / n };
    let coverage_se = if used.is_empty() {
        f64::NAN
    } else {
        (coverage_rate * (1.0 - coverage_rate) / n).sqrt()
    };
    let total_toured: f64 = used
        .iter()
        .map(|r| r.mean_tour_length * r.tours as f64)
        .sum();
    let total_tours: f64 = used.iter().map(|r| r.tours as f64).sum();
    StudySummary {
        replications: records.len() as u64,
        used: used.len() as u64,
        excluded: (records.len() - used.len()) as u64,
        truth,
        reference_mcse,
        mean_half_width,
        sd_half_width,
        coverage_rate,
        coverage_se,
        mean_tours,
        sd_tours,
        mean_chain_length,
        sd_chain_length,
        mean_tour_length: total_toured / total_tours,
    }
}

/// Writes per-replication rows plus summary comment lines.
pub fn write_study_csv<W: std::io::Write>(
    mut out: W,
    config_comment: &str,
    outcome: &StudyOutcome,
) -> Result<()> {
    writeln!(out, "# {config_comment}")?;
    writeln!(
        out,
        "replication,estimate,half_width,covered,tours,chain_length,mean_tour_length,status"
    )?;
    for r in &outcome.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:?}",
            r.replication,
            r.estimate,
            r.half_width,
            r.covered as u8,
            r.tours,
            r.chain_length,
            r.mean_tour_length,
            r.status
        )?;
    }
    let s = serde_json::to_string(&outcome.summary).expect("summary serializes");
    writeln!(out, "# summary {s}")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Random-walk regeneration feasibility study.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub multiplier: f64,
    /// Fraction of accepted proposals landing inside the hypercube.
    pub fraction_inside: f64,
    /// Mean of the nonzero proposal-factor values.
    pub mean_nonzero_factor: f64,
    /// Sum of the full regeneration probabilities over the run: the expected
    /// number of regenerations.
    pub expected_regenerations: f64,
}

#[derive(Debug, Clone)]
pub struct FeasibilityOutcome {
    pub rows: Vec<FeasibilityRow>,
    pub steps: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
}

/// Runs one random-walk chain and tabulates, per hypercube multiplier, how
/// often the regeneration factor is nonzero and how large it is.
pub fn run_feasibility_study(
    model: &GlmmModel,
    calibration: &GlmmCalibration,
    tau2: f64,
    multipliers: &[f64],
    steps: u64,
    seed: u64,
) -> Result<FeasibilityOutcome> {
    if multipliers.is_empty() {
        return Err(Error::Config("at least one multiplier required".into()));
    }
    let proposal = glmm::GlmmRwProposal { tau2 };
    let mut rng = RandomStream::new(seed, 0);
    let mut init_rng = rng.substream(TAG_INIT);
    let init: Vec<f64> = (0..model.q)
        .map(|_| init_rng.normal(0.0, model.sigma2.sqrt()))
        .collect();
    let mut state = ChainState::new(model, init)?;

    let half_widths: Vec<Vec<f64>> = multipliers
        .iter()
        .map(|&m| calibration.u_sd.iter().map(|s| s * m).collect())
        .collect();
    let mut inside = vec![0u64; multipliers.len()];
    let mut factor_sum = vec![0.0f64; multipliers.len()];
    let mut regen_sum = vec![0.0f64; multipliers.len()];
    let mut accepted = 0u64;

    for _ in 0..steps {
        let prev = state.x().to_vec();
        let prev_log_pi = state.log_pi();
        let out = mh_step(model, &mut state, &proposal, &mut rng)?;
        if !out.accepted {
            continue;
        }
        accepted += 1;
        let three_case = mty_regen_prob(prev_log_pi, state.log_pi(), calibration.log_c_pi);
        for (k, hw) in half_widths.iter().enumerate() {
            let f =
                glmm::glmm_rw_regen_factor(&prev, state.x(), &calibration.u_mean, hw, tau2);
            if f > 0.0 {
                inside[k] += 1;
                factor_sum[k] += f;
                regen_sum[k] += f * three_case;
            }
        }
    }

    let rows = multipliers
        .iter()
        .enumerate()
        .map(|(k, &m)| FeasibilityRow {
            multiplier: m,
            fraction_inside: if accepted == 0 { 0.0 } else { inside[k] as f64 / accepted as f64 },
            mean_nonzero_factor: if inside[k] == 0 {
                f64::NAN
            } else {
                factor_sum[k] / inside[k] as f64
            },
            expected_regenerations: regen_sum[k],
        })
        .collect();
    Ok(FeasibilityOutcome {
        rows,
        steps,
        accepted,
        acceptance_rate: accepted as f64 / steps as f64,
    })
}

/// Writes `b_mult,fraction_nonzero,mean_nonzero_prob,expected_regenerations`.
pub fn write_feasibility_csv<W: std::io::Write>(
    mut out: W,
    config_comment: &str,
    outcome: &FeasibilityOutcome,
) -> Result<()> {
    writeln!(out, "# {config_comment}")?;
    writeln!(
        out,
        "# steps={} accepted={} acceptance_rate={}",
        outcome.steps, outcome.accepted, outcome.acceptance_rate
    )?;
    writeln!(out, "b_mult,fraction_nonzero,mean_nonzero_prob,expected_regenerations")?;
    for r in &outcome.rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.multiplier, r.fraction_inside, r.mean_nonzero_factor, r.expected_regenerations
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

/// Convenience wrapper for collect-then-estimate on an in-memory split trace.
pub fn estimate_from_trace(
    trace: &crate::regen::SplitTrace,
    level: f64,
) -> Result<crate::regen::RegenEstimate> {
    let tours = collect_tours(&trace.delta, &trace.g)?;
    rs_confidence_interval(&tours, level)
}
