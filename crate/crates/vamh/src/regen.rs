//! Split-chain simulation and regenerative-simulation estimators.
//!
//! A split chain augments each transition with an indicator `delta` that
//! marks regeneration times. Between consecutive regenerations the chain's
//! tours are i.i.d., so tour sums yield central-limit standard errors for
//! ergodic averages. Component-wise samplers regenerate only on sweeps in
//! which every component proposal was accepted.

use crate::chain::{
    composition_sweep, log_accept_ratio, mh_step, ChainState, ComponentProposal, Proposal, Target,
};
use crate::error::{Error, Result};
use crate::stream::RandomStream;

/// 97.5% standard-normal quantile, used for 95% intervals.
pub const Z_975: f64 = 1.959964;

/// A state function in log space; receives the full flat state vector.
pub type StateFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Minorization data for one component of a composition sampler.
///
/// The sandwich `g1(y_head) * g2(x_tail) <= r_i <= h1(y_head) * h2(x_tail)`
/// must hold wherever the target is positive, with `r_i = pi / w_i` for the
/// weight function `w_i` that symmetrizes the proposal. Each function takes a
/// full state vector; by construction it may only depend on the coordinates
/// indicated in its name (head = components up to the update position, tail =
/// components from it onward).
pub struct ComponentMinorization {
    /// `log s_i`, evaluated at the pre-sweep state.
    pub log_s: StateFn,
    /// `log q_i`, evaluated at the post-sweep state. `None` means `q_i` equals
    /// the proposal density and the pair cancels analytically.
    pub log_q: Option<StateFn>,
    /// `log g_{i1}`, evaluated at the post-sweep state.
    pub log_g1: StateFn,
    /// `log g_{i2}`, evaluated at the pre-sweep state.
    pub log_g2: StateFn,
    /// `log h_{i1}`, evaluated at the post-sweep state.
    pub log_h1: StateFn,
    /// `log h_{i2}`, evaluated at the pre-sweep state.
    pub log_h2: StateFn,
    /// Log of the positive constant in the two min-factors.
    pub log_c: f64,
}

/// Per-component minorization functions for a composition sampler.
pub struct MinorizationSpec {
    pub components: Vec<ComponentMinorization>,
}

impl MinorizationSpec {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }
}

/// Tolerance above 1 before a regeneration factor is treated as a
/// minorization violation rather than rounding.
const FACTOR_SLACK: f64 = 1e-9;

/// Three-case regeneration probability for an independence sampler, in log
/// space. `log_r_prev`/`log_r_curr` are the log target/proposal ratios at the
/// two endpoints of an accepted jump and `log_c` the retained constant:
///
/// - both ratios below `c`: `max{r_prev, r_curr} / c`
/// - both ratios above `c`: `c / min{r_prev, r_curr}`
/// - otherwise: 1.
///
/// This is the direction that factorizes exactly as `s(x) q(y)`, with
/// `s(x) = min{1, c/r(x)}` and `q(y)` proportional to `min{p(y), pi(y)/c}`.
pub fn mty_regen_prob(log_r_prev: f64, log_r_curr: f64, log_c: f64) -> f64 {
    if log_r_prev < log_c && log_r_curr < log_c {
        (log_r_prev.max(log_r_curr) - log_c).exp()
    } else if log_r_prev > log_c && log_r_curr > log_c {
        (log_c - log_r_prev.min(log_r_curr)).exp()
    } else {
        1.0
    }
}

/// Regeneration probability of a component-wise sampler on an all-accepted
/// jump from `prev` to `curr`, computed from the minorization functions.
///
/// Each factor combines the component's `s`/`q` parts, the two min-factors,
/// and the acceptance probability of that component's move, reconstructed on
/// the mid-sweep states. A factor above `1 + 1e-9` signals invalid
/// minorization inputs and is returned as an error.
pub fn cwis_regen_prob(
    target: &dyn Target,
    proposals: &[Box<dyn ComponentProposal>],
    spec: &MinorizationSpec,
    prev: &[f64],
    curr: &[f64],
) -> Result<f64> {
    let d = target.component_count();
    if spec.component_count() != d || proposals.len() != d {
        return Err(Error::Config(
            "minorization spec, proposals and target disagree on the component count".into(),
        ));
    }
    let offsets = crate::chain::component_offsets(&target.component_dims());

    // Walk through the intermediate states of the sweep.
    let mut mid = prev.to_vec();
    let mut log_pi_from = target.log_density(&mid);
    let mut total = 0.0;
    for i in 0..d {
        let (lo, hi) = (offsets[i], offsets[i + 1]);
        let cand = &curr[lo..hi];
        let log_fwd = proposals[i].log_density(&mid, cand);
        let prev_slot = prev[lo..hi].to_vec();
        mid[lo..hi].copy_from_slice(cand);
        let log_pi_to = target.log_density(&mid);
        let log_rev = proposals[i].log_density(&mid, &prev_slot);
        let log_alpha = log_accept_ratio(log_pi_from, log_pi_to, log_fwd, log_rev)?;

        let comp = &spec.components[i];
        let mut factor = (comp.log_s)(prev)
            + ((comp.log_g2)(prev) - comp.log_c - (comp.log_h2)(prev)).min(0.0)
            + (comp.log_c + (comp.log_g1)(curr) - (comp.log_h1)(curr)).min(0.0)
            - log_alpha;
        if let Some(log_q) = &comp.log_q {
            factor += log_q(curr) - log_fwd;
        }
        if factor > FACTOR_SLACK {
            return Err(Error::MinorizationViolation { factor: factor.exp(), component: i });
        }
        total += factor.min(0.0);
        log_pi_from = log_pi_to;
    }
    Ok(total.exp())
}

/// One transition of the component-wise split chain.
#[derive(Debug, Clone)]
pub struct SplitStep {
    /// Regeneration indicator for this jump.
    pub delta: bool,
    /// Whether every component proposal was accepted.
    pub all_accepted: bool,
}

/// Performs one composition sweep and draws the regeneration indicator.
///
/// The indicator uses `delta_rng`, a dedicated substream, so the state path
/// is bit-identical to a plain [`composition_sweep`] driven by `rng`. A sweep
/// with any rejected component sets `delta = 0` without consuming a draw;
/// otherwise exactly one uniform is taken from `delta_rng`.
pub fn split_sweep(
    target: &dyn Target,
    proposals: &[Box<dyn ComponentProposal>],
    spec: &MinorizationSpec,
    state: &mut ChainState,
    rng: &mut RandomStream,
    delta_rng: &mut RandomStream,
) -> Result<SplitStep> {
    let prev = state.x().to_vec();
    let outcomes = composition_sweep(target, state, proposals, rng)?;
    let all_accepted = outcomes.iter().all(|o| o.accepted);
    if !all_accepted {
        return Ok(SplitStep { delta: false, all_accepted });
    }

    // Reuse the sweep's own acceptance values; the formula is identical to
    // cwis_regen_prob but avoids re-deriving the mid-sweep states.
    let curr = state.x();
    let mut total = 0.0;
    for (i, out) in outcomes.iter().enumerate() {
        let comp = &spec.components[i];
        let mut factor = (comp.log_s)(&prev)
            + ((comp.log_g2)(&prev) - comp.log_c - (comp.log_h2)(&prev)).min(0.0)
            + (comp.log_c + (comp.log_g1)(curr) - (comp.log_h1)(curr)).min(0.0)
            - out.log_alpha;
        if let Some(log_q) = &comp.log_q {
            factor += log_q(curr) - out.log_p_forward;
        }
        if factor > FACTOR_SLACK {
            return Err(Error::MinorizationViolation { factor: factor.exp(), component: i });
        }
        total += factor.min(0.0);
    }
    let delta = delta_rng.uniform() < total.exp();
    Ok(SplitStep { delta, all_accepted })
}

/// Split trace of a chain run: per-step functional values plus indicators.
#[derive(Debug, Clone, Default)]
pub struct SplitTrace {
    pub g: Vec<f64>,
    pub delta: Vec<bool>,
    pub all_accepted: Vec<bool>,
}

impl SplitTrace {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Writes `step,g,delta,all_accepted` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, config_comment: &str) -> Result<()> {
        writeln!(out, "# {config_comment}")?;
        writeln!(out, "step,g,delta,all_accepted")?;
        for (k, ((g, d), a)) in self
            .g
            .iter()
            .zip(&self.delta)
            .zip(&self.all_accepted)
            .enumerate()
        {
            writeln!(out, "{},{},{},{}", k + 1, g, *d as u8, *a as u8)?;
        }
        Ok(())
    }
}

/// Runs `n` split-chain sweeps, recording `g` of each post-sweep state.
pub fn run_split_chain<F>(
    target: &dyn Target,
    proposals: &[Box<dyn ComponentProposal>],
    spec: &MinorizationSpec,
    state: &mut ChainState,
    n: usize,
    mut g: F,
    rng: &mut RandomStream,
    delta_rng: &mut RandomStream,
) -> Result<SplitTrace>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut trace = SplitTrace::default();
    trace.g.reserve(n);
    for _ in 0..n {
        let step = split_sweep(target, proposals, spec, state, rng, delta_rng)?;
        trace.g.push(g(state.x()));
        trace.delta.push(step.delta);
        trace.all_accepted.push(step.all_accepted);
    }
    Ok(trace)
}

/// Split chain for a single-block independence sampler, with the three-case
/// regeneration rule. `log_ratio` must return `log(pi/p)` in any fixed
/// scale consistent with `log_c`.
pub fn run_split_chain_independence<F, R>(
    target: &dyn Target,
    proposal: &dyn Proposal,
    log_ratio: R,
    log_c: f64,
    state: &mut ChainState,
    n: usize,
    mut g: F,
    rng: &mut RandomStream,
    delta_rng: &mut RandomStream,
) -> Result<SplitTrace>
where
    F: FnMut(&[f64]) -> f64,
    R: Fn(&[f64]) -> f64,
{
    let mut trace = SplitTrace::default();
    trace.g.reserve(n);
    let mut log_r_curr = log_ratio(state.x());
    for _ in 0..n {
        let log_r_prev = log_r_curr;
        let out = mh_step(target, state, proposal, rng)?;
        let delta = if out.accepted {
            log_r_curr = log_ratio(state.x());
            let p = mty_regen_prob(log_r_prev, log_r_curr, log_c);
            delta_rng.uniform() < p
        } else {
            false
        };
        trace.g.push(g(state.x()));
        trace.delta.push(delta);
        trace.all_accepted.push(out.accepted);
    }
    Ok(trace)
}

/// One regeneration tour: its length and the sum of `g` over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tour {
    pub length: u64,
    pub sum: f64,
}

/// Segments a split trace into complete tours.
///
/// Tour boundaries are the steps whose `delta` is set; the partial segments
/// before the first marker and from the last marker onward are discarded.
/// Errs when the trace contains no regeneration at all.
pub fn collect_tours(delta: &[bool], g: &[f64]) -> Result<Vec<Tour>> {
    assert_eq!(delta.len(), g.len());
    let mut tours = Vec::new();
    let mut start: Option<usize> = None;
    for (k, &d) in delta.iter().enumerate() {
        if d {
            if let Some(s) = start {
                tours.push(Tour {
                    length: (k - s) as u64,
                    sum: g[s..k].iter().sum(),
                });
            }
            start = Some(k);
        }
    }
    if start.is_none() {
        return Err(Error::InsufficientRegenerations);
    }
    Ok(tours)
}

/// Ratio estimator of the stationary mean from complete tours.
pub fn rs_point_estimate(tours: &[Tour]) -> Result<f64> {
    if tours.is_empty() {
        return Err(Error::InsufficientRegenerations);
    }
    let s: f64 = tours.iter().map(|t| t.sum).sum();
    let n: u64 = tours.iter().map(|t| t.length).sum();
    Ok(s / n as f64)
}

/// Tour-based estimate of the asymptotic variance in the sqrt(R) central
/// limit theorem. Returns 0 for a single tour (the variance is degenerate).
pub fn rs_variance(tours: &[Tour]) -> f64 {
    let r = tours.len();
    if r < 2 {
        if r == 1 {
            log::warn!("variance requested from a single tour; returning the degenerate 0");
        }
        return 0.0;
    }
    let g_bar = rs_point_estimate(tours).expect("nonempty");
    let n_bar = tours.iter().map(|t| t.length as f64).sum::<f64>() / r as f64;
    let ss: f64 = tours
        .iter()
        .map(|t| {
            let d = t.sum - t.length as f64 * g_bar;
            d * d
        })
        .sum();
    ss / (r as f64 * n_bar * n_bar)
}

/// Point estimate with a tour-based confidence interval.
#[derive(Debug, Clone, Copy)]
pub struct RegenEstimate {
    pub g_bar: f64,
    pub xi2_hat: f64,
    pub tours: usize,
    pub half_width: f64,
}

/// Builds the `100 * level %` confidence interval from complete tours.
pub fn rs_confidence_interval(tours: &[Tour], level: f64) -> Result<RegenEstimate> {
    if tours.len() < 2 {
        return Err(Error::InsufficientRegenerations);
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    let g_bar = rs_point_estimate(tours)?;
    let xi2_hat = rs_variance(tours);
    let z = normal_quantile_two_sided(level);
    let half_width = z * (xi2_hat / tours.len() as f64).sqrt();
    Ok(RegenEstimate { g_bar, xi2_hat, tours: tours.len(), half_width })
}

/// `z` with `P(|Z| <= z) = level`; the 95% value is the stored constant.
pub fn normal_quantile_two_sided(level: f64) -> f64 {
    if (level - 0.95).abs() < 1e-12 {
        Z_975
    } else {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.5 + level / 2.0)
    }
}

/// Writes tours as `tour,N,S` rows.
pub fn write_tours_csv<W: std::io::Write>(
    mut out: W,
    config_comment: &str,
    tours: &[Tour],
) -> Result<()> {
    writeln!(out, "# {config_comment}")?;
    writeln!(out, "tour,N,S")?;
    for (r, t) in tours.iter().enumerate() {
        writeln!(out, "{},{},{}", r + 1, t.length, t.sum)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mty_boundary_is_one() {
        let c = 0.7f64.ln();
        assert_eq!(mty_regen_prob(c, c, c), 1.0);
    }

    #[test]
    fn mty_both_below() {
        // r_prev = 0.2c, r_curr = 0.5c -> max/c = 0.5 under the exact
        // (factorizable) form of the three-case rule.
        let c = 1.3f64.ln();
        let p = mty_regen_prob(c + 0.2f64.ln(), c + 0.5f64.ln(), c);
        assert_relative_eq!(p, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn mty_both_above() {
        let c = 0.0;
        let p = mty_regen_prob(2.0f64.ln(), 4.0f64.ln(), c);
        assert_relative_eq!(p, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn mty_straddle_is_one() {
        assert_eq!(mty_regen_prob(-1.0, 1.0, 0.0), 1.0);
        assert_eq!(mty_regen_prob(1.0, -1.0, 0.0), 1.0);
    }

    #[test]
    fn tours_from_delta_sequence() {
        let delta = [true, false, false, true, false, true];
        let g = [1.0; 6];
        let tours = collect_tours(&delta, &g).unwrap();
        assert_eq!(tours.len(), 2);
        assert_eq!(tours[0], Tour { length: 3, sum: 3.0 });
        assert_eq!(tours[1], Tour { length: 2, sum: 2.0 });
        // kept lengths telescope to the index gap between first and last marker
        let kept: u64 = tours.iter().map(|t| t.length).sum();
        assert_eq!(kept, 5);
    }

    #[test]
    fn all_deltas_give_unit_tours() {
        let delta = [true; 5];
        let g = [2.0, 3.0, 4.0, 5.0, 6.0];
        let tours = collect_tours(&delta, &g).unwrap();
        assert_eq!(tours.len(), 4);
        for (r, t) in tours.iter().enumerate() {
            assert_eq!(t.length, 1);
            assert_eq!(t.sum, g[r]);
        }
    }

    #[test]
    fn no_regeneration_errors() {
        let err = collect_tours(&[false, false], &[0.0, 0.0]);
        assert!(matches!(err, Err(Error::InsufficientRegenerations)));
    }

    #[test]
    fn point_estimate_examples() {
        assert_eq!(rs_point_estimate(&[Tour { length: 3, sum: 6.0 }]).unwrap(), 2.0);
        let tours = [Tour { length: 2, sum: 10.0 }, Tour { length: 3, sum: 0.0 }];
        assert_eq!(rs_point_estimate(&tours).unwrap(), 2.0);
    }

    #[test]
    fn variance_examples() {
        // S_r = N_r * g_bar exactly -> 0
        let tours = [Tour { length: 2, sum: 4.0 }, Tour { length: 3, sum: 6.0 }];
        assert_eq!(rs_variance(&tours), 0.0);
        // (1,0), (1,2): g_bar = 1, N_bar = 1 -> (1/2)(1+1) = 1
        let tours = [Tour { length: 1, sum: 0.0 }, Tour { length: 1, sum: 2.0 }];
        assert_eq!(rs_variance(&tours), 1.0);
        // single tour degenerates to 0
        assert_eq!(rs_variance(&tours[..1]), 0.0);
    }

    #[test]
    fn interval_uses_stored_constant() {
        // R = 100, xi2 = 4 -> half width 1.959964 * 2 / 10
        let tours: Vec<Tour> = (0..100)
            .map(|i| Tour { length: 1, sum: if i % 2 == 0 { 2.0 } else { -2.0 } })
            .collect();
        let est = rs_confidence_interval(&tours, 0.95).unwrap();
        assert_relative_eq!(est.xi2_hat, 4.0, max_relative = 1e-12);
        assert_relative_eq!(est.half_width, 0.3919928, max_relative = 1e-12);
        // zero variance -> zero width
        let tours = [Tour { length: 2, sum: 4.0 }, Tour { length: 3, sum: 6.0 }];
        assert_eq!(rs_confidence_interval(&tours, 0.95).unwrap().half_width, 0.0);
    }

    #[test]
    fn point_estimate_equals_ergodic_mean_over_kept_span() {
        // identity g_bar(RS) = mean of g between first and last marker
        let delta = [false, true, false, false, true, true, false, true, false];
        let g = [9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let tours = collect_tours(&delta, &g).unwrap();
        let est = rs_point_estimate(&tours).unwrap();
        let kept = &g[1..7];
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        assert_relative_eq!(est, mean, max_relative = 1e-15);
    }
}
