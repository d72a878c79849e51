//! Metropolis-Hastings machinery over product state spaces.
//!
//! A state is a flat `Vec<f64>` partitioned into `d` components whose widths
//! come from [`Target::component_dims`]. Component-wise updates can be
//! combined by deterministic composition (one full cycle per step) or by
//! simple mixing (one randomly selected component per step); a full-state
//! proposal gives the usual single-block sampler.

use crate::error::{Error, Result};
use crate::stream::RandomStream;

/// An unnormalized target density over a product space.
///
/// `log_density` returns negative infinity exactly when some component sits
/// outside its support. Targets with a component-wise additive decomposition
/// can expose it through [`Target::component_term`], which lets sweeps update
/// the cached log density in O(component) work.
pub trait Target: Send + Sync {
    fn component_count(&self) -> usize;

    /// Per-component dimensions `b_i`; the flat state length is their sum.
    fn component_dims(&self) -> Vec<usize> {
        vec![1; self.component_count()]
    }

    /// Unnormalized log density; `-inf` encodes a zero-density state.
    fn log_density(&self, x: &[f64]) -> f64;

    /// Membership test for component `index` alone.
    fn component_in_support(&self, index: usize, value: &[f64]) -> bool;

    /// Additive contribution of component `index` when the target factorizes
    /// as `log pi(x) = sum_i term_i(x_i)`. `None` when it does not.
    fn component_term(&self, _x: &[f64], _index: usize) -> Option<f64> {
        None
    }
}

/// A full-state proposal kernel.
pub trait Proposal: Send + Sync {
    fn propose(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>>;

    /// Log proposal density of moving from `from` to `to`. Constants shared
    /// by every evaluation may be omitted; only ratios and internally
    /// consistent scales are ever used.
    fn log_density(&self, from: &[f64], to: &[f64]) -> f64;

    fn state_independent(&self) -> bool {
        false
    }
}

/// A proposal kernel for a single component of the state.
pub trait ComponentProposal: Send + Sync {
    /// Which component this proposal updates.
    fn index(&self) -> usize;

    /// Draws a candidate for this component given the full current state.
    fn propose(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>>;

    /// Log density of proposing `candidate` for this component from `x`.
    fn log_density(&self, x: &[f64], candidate: &[f64]) -> f64;

    fn state_independent(&self) -> bool {
        false
    }
}

/// Current chain position with its cached log target density.
#[derive(Debug, Clone)]
pub struct ChainState {
    x: Vec<f64>,
    log_pi: f64,
    /// Per-component contributions for factorized targets, kept in sync with
    /// `x` by the sweep operations.
    terms: Option<Vec<f64>>,
}

impl ChainState {
    pub fn new(target: &dyn Target, x: Vec<f64>) -> Result<Self> {
        let log_pi = target.log_density(&x);
        if log_pi == f64::NEG_INFINITY {
            return Err(Error::InvalidState(format!(
                "initial state {x:?} has zero target density"
            )));
        }
        Ok(Self { x, log_pi, terms: None })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn log_pi(&self) -> f64 {
        self.log_pi
    }

    fn ensure_terms(&mut self, target: &dyn Target) {
        if self.terms.is_none() {
            if target.component_term(&self.x, 0).is_some() {
                let d = target.component_count();
                let terms: Vec<f64> = (0..d)
                    .map(|i| target.component_term(&self.x, i).expect("factorized target"))
                    .collect();
                self.log_pi = terms.iter().sum();
                self.terms = Some(terms);
            }
        }
    }
}

/// Offsets of each component inside the flat state vector (with a final
/// entry equal to the total length).
pub fn component_offsets(dims: &[usize]) -> Vec<usize> {
    let mut offs = Vec::with_capacity(dims.len() + 1);
    let mut acc = 0;
    for d in dims {
        offs.push(acc);
        acc += d;
    }
    offs.push(acc);
    offs
}

/// Acceptance probability of a Metropolis-Hastings move, computed in log space.
///
/// Arguments are the log target density at the current and candidate states
/// and the log proposal densities of the forward and reverse moves. Returns
/// `min{1, exp[(log_pi_y - log_pi_x) + (log_p_yx - log_p_xy)]}`, zero when the
/// candidate has zero density, and an error when the *current* state has zero
/// density (the chain should never occupy such a state).
pub fn mh_accept_log(log_pi_x: f64, log_pi_y: f64, log_p_xy: f64, log_p_yx: f64) -> Result<f64> {
    Ok(log_accept_ratio(log_pi_x, log_pi_y, log_p_xy, log_p_yx)?.exp())
}

/// Like [`mh_accept_log`] but returns `log alpha = min{0, ...}` without
/// leaving log space.
pub fn log_accept_ratio(
    log_pi_x: f64,
    log_pi_y: f64,
    log_p_xy: f64,
    log_p_yx: f64,
) -> Result<f64> {
    if log_pi_x == f64::NEG_INFINITY {
        return Err(Error::InvalidState(
            "acceptance ratio requested from a zero-density state".into(),
        ));
    }
    debug_assert!(
        log_p_xy > f64::NEG_INFINITY,
        "candidate was drawn, so its forward proposal density must be positive"
    );
    if log_pi_y == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    // Clamped before exponentiation; the toy and GLMM ratios overflow in
    // linear space. min{0, .} keeps alpha = exp(.) in [0, 1].
    let d = (log_pi_y - log_pi_x) + (log_p_yx - log_p_xy);
    Ok(d.min(50.0).min(0.0))
}

/// Outcome of one accept/reject decision.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub accepted: bool,
    pub alpha: f64,
}

/// One single-block Metropolis-Hastings update. Consumes exactly one proposal
/// draw and one uniform; on rejection the state is left untouched.
pub fn mh_step(
    target: &dyn Target,
    state: &mut ChainState,
    proposal: &dyn Proposal,
    rng: &mut RandomStream,
) -> Result<StepOutcome> {
    let candidate = proposal.propose(&state.x, rng)?;
    let log_pi_y = target.log_density(&candidate);
    let log_fwd = proposal.log_density(&state.x, &candidate);
    let log_rev = proposal.log_density(&candidate, &state.x);
    let alpha = mh_accept_log(state.log_pi, log_pi_y, log_fwd, log_rev)?;
    let accepted = rng.uniform() < alpha;
    if accepted {
        state.x = candidate;
        state.log_pi = log_pi_y;
        state.terms = None;
    }
    Ok(StepOutcome { accepted, alpha })
}

/// Per-component record of one update inside a sweep.
#[derive(Debug, Clone, Copy)]
pub struct ComponentOutcome {
    pub accepted: bool,
    pub alpha: f64,
    /// `log alpha` (≤ 0), kept exact for regeneration arithmetic.
    pub log_alpha: f64,
    /// Log proposal density of the candidate that was attempted.
    pub log_p_forward: f64,
}

fn component_update(
    target: &dyn Target,
    state: &mut ChainState,
    proposal: &dyn ComponentProposal,
    offsets: &[usize],
    scratch: &mut Vec<f64>,
    rng: &mut RandomStream,
) -> Result<ComponentOutcome> {
    let i = proposal.index();
    let (lo, hi) = (offsets[i], offsets[i + 1]);

    let candidate = proposal.propose(&state.x, rng)?;
    debug_assert_eq!(candidate.len(), hi - lo);
    let log_fwd = proposal.log_density(&state.x, &candidate);

    // Evaluate the candidate state in place, restoring the slot on rejection.
    scratch.clear();
    scratch.extend_from_slice(&state.x[lo..hi]);
    state.x[lo..hi].copy_from_slice(&candidate);

    let (log_pi_y, new_term) = match state.terms.as_ref() {
        Some(terms) => {
            let t = target
                .component_term(&state.x, i)
                .expect("factorized target lost its decomposition");
            (state.log_pi - terms[i] + t, Some(t))
        }
        None => (target.log_density(&state.x), None),
    };
    let log_rev = proposal.log_density(&state.x, scratch);

    let log_alpha = log_accept_ratio(state.log_pi, log_pi_y, log_fwd, log_rev)?;
    let alpha = log_alpha.exp();
    let accepted = rng.uniform() < alpha;
    if accepted {
        state.log_pi = log_pi_y;
        if let (Some(terms), Some(t)) = (state.terms.as_mut(), new_term) {
            terms[i] = t;
        }
    } else {
        state.x[lo..hi].copy_from_slice(scratch);
    }
    Ok(ComponentOutcome { accepted, alpha, log_alpha, log_p_forward: log_fwd })
}

fn check_proposals(target: &dyn Target, proposals: &[Box<dyn ComponentProposal>]) -> Result<()> {
    let d = target.component_count();
    if proposals.len() != d {
        return Err(Error::Config(format!(
            "target has {d} components but {} proposals were supplied",
            proposals.len()
        )));
    }
    for (i, p) in proposals.iter().enumerate() {
        if p.index() != i {
            return Err(Error::Config(format!(
                "proposal at position {i} updates component {}",
                p.index()
            )));
        }
    }
    Ok(())
}

/// One deterministic composition sweep: components are updated in index
/// order, so the i-th acceptance sees the already-updated head and the
/// not-yet-updated tail of the state.
pub fn composition_sweep(
    target: &dyn Target,
    state: &mut ChainState,
    proposals: &[Box<dyn ComponentProposal>],
    rng: &mut RandomStream,
) -> Result<Vec<ComponentOutcome>> {
    check_proposals(target, proposals)?;
    state.ensure_terms(target);
    let offsets = component_offsets(&target.component_dims());
    let mut scratch = Vec::new();
    let mut outcomes = Vec::with_capacity(proposals.len());
    for proposal in proposals {
        outcomes.push(component_update(
            target,
            state,
            proposal.as_ref(),
            &offsets,
            &mut scratch,
            rng,
        )?);
    }
    Ok(outcomes)
}

/// Outcome of one simple-mixing step.
#[derive(Debug, Clone, Copy)]
pub struct MixOutcome {
    pub chosen: usize,
    pub accepted: bool,
    pub alpha: f64,
}

pub fn check_weights(weights: &[f64], d: usize) -> Result<()> {
    if weights.len() != d {
        return Err(Error::Config(format!(
            "{} selection weights for {d} components",
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Config("selection weights must be positive".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "selection weights sum to {sum}, expected 1 within 1e-12"
        )));
    }
    Ok(())
}

/// One simple-mixing step: selects component `i` with probability
/// `weights[i]` (one uniform draw) and applies a single component update.
pub fn mixing_step(
    target: &dyn Target,
    state: &mut ChainState,
    proposals: &[Box<dyn ComponentProposal>],
    weights: &[f64],
    rng: &mut RandomStream,
) -> Result<MixOutcome> {
    check_proposals(target, proposals)?;
    check_weights(weights, proposals.len())?;
    state.ensure_terms(target);

    let u = rng.uniform();
    let mut acc = 0.0;
    let mut chosen = proposals.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = i;
            break;
        }
    }

    let offsets = component_offsets(&target.component_dims());
    let mut scratch = Vec::new();
    let out = component_update(
        target,
        state,
        proposals[chosen].as_ref(),
        &offsets,
        &mut scratch,
        rng,
    )?;
    Ok(MixOutcome { chosen, accepted: out.accepted, alpha: out.alpha })
}

/// Transition kernel selector for [`run_chain`].
pub enum Kernel<'a> {
    SingleBlock(&'a dyn Proposal),
    Composition(&'a [Box<dyn ComponentProposal>]),
    Mixing(&'a [Box<dyn ComponentProposal>], &'a [f64]),
}

/// Trace of a chain run: the per-step values of a scalar functional plus
/// acceptance bookkeeping. Memory is O(n) in `g` and O(1) in states.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub g: Vec<f64>,
    /// Acceptance rate per component (a single entry for single-block runs).
    pub acceptance: Vec<f64>,
    pub ergodic_mean: f64,
}

/// Runs `n` steps of the selected kernel, recording `g` of each post-update
/// state. `observe` is called once per step with the step index (from 1), the
/// state, and the per-component accept flags for that step.
pub fn run_chain_with<F, O>(
    target: &dyn Target,
    kernel: &Kernel<'_>,
    state: &mut ChainState,
    n: usize,
    mut g: F,
    rng: &mut RandomStream,
    mut observe: O,
) -> Result<ChainTrace>
where
    F: FnMut(&[f64]) -> f64,
    O: FnMut(usize, &ChainState, &[bool]),
{
    if n == 0 {
        return Err(Error::Config("chain length must be at least 1".into()));
    }
    let d = match kernel {
        Kernel::SingleBlock(_) => 1,
        Kernel::Composition(props) | Kernel::Mixing(props, _) => props.len(),
    };
    let mut accepts = vec![0u64; d];
    let mut attempts = vec![0u64; d];
    let mut trace = Vec::with_capacity(n);
    let mut flags = vec![false; d];

    for step in 1..=n {
        match kernel {
            Kernel::SingleBlock(proposal) => {
                let out = mh_step(target, state, *proposal, rng)?;
                flags[0] = out.accepted;
                attempts[0] += 1;
                accepts[0] += out.accepted as u64;
            }
            Kernel::Composition(proposals) => {
                let outs = composition_sweep(target, state, proposals, rng)?;
                for (i, o) in outs.iter().enumerate() {
                    flags[i] = o.accepted;
                    attempts[i] += 1;
                    accepts[i] += o.accepted as u64;
                }
            }
            Kernel::Mixing(proposals, weights) => {
                let out = mixing_step(target, state, proposals, weights, rng)?;
                flags.iter_mut().for_each(|f| *f = false);
                flags[out.chosen] = out.accepted;
                attempts[out.chosen] += 1;
                accepts[out.chosen] += out.accepted as u64;
            }
        }
        trace.push(g(&state.x));
        observe(step, state, &flags);
    }

    let acceptance = accepts
        .iter()
        .zip(&attempts)
        .map(|(&a, &t)| if t == 0 { 0.0 } else { a as f64 / t as f64 })
        .collect();
    let ergodic_mean = trace.iter().sum::<f64>() / n as f64;
    Ok(ChainTrace { g: trace, acceptance, ergodic_mean })
}

/// [`run_chain_with`] without an observer.
pub fn run_chain<F>(
    target: &dyn Target,
    kernel: &Kernel<'_>,
    state: &mut ChainState,
    n: usize,
    g: F,
    rng: &mut RandomStream,
) -> Result<ChainTrace>
where
    F: FnMut(&[f64]) -> f64,
{
    run_chain_with(target, kernel, state, n, g, rng, |_, _, _| {})
}

/// Writes a trace CSV with header `step,g,accepted_any,acc_1,...,acc_d`.
pub fn write_trace_csv<W: std::io::Write>(
    mut out: W,
    config_comment: &str,
    rows: &[(usize, f64, Vec<bool>)],
) -> Result<()> {
    writeln!(out, "# {config_comment}")?;
    let d = rows.first().map_or(0, |(_, _, f)| f.len());
    let mut header = String::from("step,g,accepted_any");
    for i in 1..=d {
        header.push_str(&format!(",acc_{i}"));
    }
    writeln!(out, "{header}")?;
    for (step, g, flags) in rows {
        let any = flags.iter().any(|&b| b) as u8;
        let mut line = format!("{step},{g},{any}");
        for &f in flags {
            line.push_str(if f { ",1" } else { ",0" });
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Closure-backed target, handy for tests and discrete instances.
pub struct FnTarget<F, S> {
    pub d: usize,
    pub dims: Vec<usize>,
    pub log_pi: F,
    pub in_support: S,
}

impl<F, S> Target for FnTarget<F, S>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    S: Fn(usize, &[f64]) -> bool + Send + Sync,
{
    fn component_count(&self) -> usize {
        self.d
    }

    fn component_dims(&self) -> Vec<usize> {
        self.dims.clone()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.log_pi)(x)
    }

    fn component_in_support(&self, index: usize, value: &[f64]) -> bool {
        (self.in_support)(index, value)
    }
}
