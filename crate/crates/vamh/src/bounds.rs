//! Closed-form total-variation bound calculators and an exact discrete-state
//! oracle that enumerates transition matrices to verify them.
//!
//! Everything here works on [`DiscreteInstance`]: a small product state space
//! with a normalized target vector and per-component state-independent
//! proposal tables. Matrices are dense and the state count is capped, since
//! the oracle's job is small-instance certainty.

use crate::chain::{ComponentProposal, Proposal, Target};
use crate::error::{Error, Result};
use crate::regen::{mty_regen_prob, ComponentMinorization, MinorizationSpec};
use crate::stream::RandomStream;
use serde::{Deserialize, Serialize};

/// Hard cap on enumerable state spaces.
pub const MAX_STATES: usize = 10_000;

type Matrix = Vec<Vec<f64>>;

/// A finite product-space target with per-component proposal tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteInstance {
    /// Support values of each component (labels only; any distinct reals).
    pub supports: Vec<Vec<f64>>,
    /// Normalized target probabilities over product states, last component
    /// fastest.
    pub pi: Vec<f64>,
    /// `proposals[i][k]` is the probability of proposing `supports[i][k]`.
    pub proposals: Vec<Vec<f64>>,
    /// Component update order for composition; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
    /// Selection weights for simple mixing; equal weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Kernel selector for [`exact_kernel_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Composition,
    Mixing,
    Cwis,
    SingleBlockIndependence,
}

impl DiscreteInstance {
    pub fn component_count(&self) -> usize {
        self.supports.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.supports.iter().map(|s| s.len()).collect()
    }

    pub fn state_count(&self) -> usize {
        self.sizes().iter().product()
    }

    /// Mixed-radix decode of a state index into per-component value indices.
    pub fn unrank(&self, mut idx: usize) -> Vec<usize> {
        let sizes = self.sizes();
        let mut digits = vec![0usize; sizes.len()];
        for i in (0..sizes.len()).rev() {
            digits[i] = idx % sizes[i];
            idx /= sizes[i];
        }
        digits
    }

    pub fn rank(&self, digits: &[usize]) -> usize {
        let sizes = self.sizes();
        let mut idx = 0;
        for (d, s) in digits.iter().zip(&sizes) {
            idx = idx * s + d;
        }
        idx
    }

    /// The state values of a state index.
    pub fn state_values(&self, idx: usize) -> Vec<f64> {
        self.unrank(idx)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.supports[i][k])
            .collect()
    }

    /// Product proposal probability of a state index.
    pub fn block_proposal_prob(&self, idx: usize) -> f64 {
        self.unrank(idx)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.proposals[i][k])
            .product()
    }

    pub fn update_order(&self) -> Vec<usize> {
        self.order
            .clone()
            .unwrap_or_else(|| (0..self.component_count()).collect())
    }

    pub fn mixing_weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| {
            let d = self.component_count();
            vec![1.0 / d as f64; d]
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.component_count();
        if d == 0 {
            return Err(Error::Config("instance has no components".into()));
        }
        if self.proposals.len() != d {
            return Err(Error::Config("one proposal table per component required".into()));
        }
        for (i, (s, p)) in self.supports.iter().zip(&self.proposals).enumerate() {
            if s.is_empty() || s.len() != p.len() {
                return Err(Error::Config(format!(
                    "component {i}: support and proposal table sizes disagree"
                )));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "component {i}: proposal row sums to {sum}"
                )));
            }
            if p.iter().any(|&v| v < 0.0) {
                return Err(Error::Config(format!("component {i}: negative proposal mass")));
            }
        }
        let n = self.state_count();
        if n > MAX_STATES {
            return Err(Error::SizeLimit { states: n, limit: MAX_STATES });
        }
        if self.pi.len() != n {
            return Err(Error::Config(format!(
                "pi has {} entries for {n} states",
                self.pi.len()
            )));
        }
        let sum: f64 = self.pi.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("pi sums to {sum}")));
        }
        // Support condition: pi(x) > 0 iff the product proposal is positive.
        for idx in 0..n {
            let p = self.block_proposal_prob(idx);
            if (self.pi[idx] > 0.0) != (p > 0.0) {
                return Err(Error::Config(format!(
                    "support condition violated at state {idx}: pi = {}, p = {p}",
                    self.pi[idx]
                )));
            }
        }
        if let Some(order) = &self.order {
            let mut seen = vec![false; d];
            for &i in order {
                if i >= d || seen[i] {
                    return Err(Error::Config("order must be a permutation of components".into()));
                }
                seen[i] = true;
            }
            if !seen.iter().all(|&b| b) {
                return Err(Error::Config("order must cover every component".into()));
            }
        }
        if let Some(w) = &self.weights {
            crate::chain::check_weights(w, d)?;
        }
        Ok(())
    }
}

/// Closed-form bound of the composition theorem: `(1 - C prod eps_i)^n`.
pub fn tv_bound_composition(eps: &[f64], c: f64, n: u32) -> Result<f64> {
    for &e in eps {
        check_unit_interval(e, "epsilon")?;
    }
    check_unit_interval(c, "C")?;
    let prod: f64 = eps.iter().product::<f64>() * c;
    if prod > 1.0 + 1e-12 {
        return Err(Error::Config(format!("C * prod(eps) = {prod} exceeds 1")));
    }
    Ok((1.0 - prod.min(1.0)).powi(n as i32))
}

/// Closed-form bound of the mixing theorem after `n` sweeps of `d` raw steps:
/// `(1 - eps prod r_i)^n`.
pub fn tv_bound_mixing(eps: f64, weights: &[f64], n: u32) -> Result<f64> {
    check_unit_interval(eps, "epsilon")?;
    crate::chain::check_weights(weights, weights.len())?;
    let prod: f64 = weights.iter().product::<f64>() * eps;
    Ok((1.0 - prod).powi(n as i32))
}

/// Closed-form bound for the component-wise independence sampler:
/// `(1 - delta eps^floor(d/2))^n`.
pub fn tv_bound_cwis(delta: f64, eps: f64, d: u32, n: u32) -> Result<f64> {
    check_unit_interval(delta, "delta")?;
    check_unit_interval(eps, "epsilon")?;
    Ok((1.0 - delta * eps.powi((d / 2) as i32)).powi(n as i32))
}

fn check_unit_interval(v: f64, name: &str) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Config(format!("{name} = {v} outside (0, 1]")));
    }
    Ok(())
}

/// Exact one-step update matrix for a single component.
///
/// Off-diagonal mass is `p_i(v) * alpha`; the rejected mass stays on the
/// diagonal (together with the always-accepted self-proposal).
pub fn component_update_matrix(inst: &DiscreteInstance, comp: usize) -> Result<Matrix> {
    inst.validate()?;
    let n = inst.state_count();
    let sizes = inst.sizes();
    let mut m = vec![vec![0.0; n]; n];
    for from in 0..n {
        if inst.pi[from] == 0.0 {
            m[from][from] = 1.0; // unreachable; keep the matrix stochastic
            continue;
        }
        let digits = inst.unrank(from);
        let cur = digits[comp];
        for v in 0..sizes[comp] {
            let p = inst.proposals[comp][v];
            if p == 0.0 {
                continue;
            }
            let mut to_digits = digits.clone();
            to_digits[comp] = v;
            let to = inst.rank(&to_digits);
            let alpha = if inst.pi[to] == 0.0 {
                0.0
            } else {
                (inst.pi[to] * inst.proposals[comp][cur] / (inst.pi[from] * p)).min(1.0)
            };
            m[from][to] += p * alpha;
            m[from][from] += p * (1.0 - alpha);
        }
    }
    check_stochastic(&m)?;
    Ok(m)
}

/// Exact one-step transition matrix of the selected kernel.
pub fn exact_kernel_matrix(inst: &DiscreteInstance, kind: KernelKind) -> Result<Matrix> {
    inst.validate()?;
    let n = inst.state_count();
    let m = match kind {
        KernelKind::Composition | KernelKind::Cwis => {
            let mut acc: Option<Matrix> = None;
            for comp in inst.update_order() {
                let step = component_update_matrix(inst, comp)?;
                acc = Some(match acc {
                    None => step,
                    Some(a) => mat_mul(&a, &step),
                });
            }
            acc.expect("at least one component")
        }
        KernelKind::Mixing => {
            let weights = inst.mixing_weights();
            let mut acc = vec![vec![0.0; n]; n];
            for (comp, w) in weights.iter().enumerate() {
                let step = component_update_matrix(inst, comp)?;
                for (row_a, row_s) in acc.iter_mut().zip(&step) {
                    for (a, s) in row_a.iter_mut().zip(row_s) {
                        *a += w * s;
                    }
                }
            }
            acc
        }
        KernelKind::SingleBlockIndependence => {
            let mut m = vec![vec![0.0; n]; n];
            for from in 0..n {
                if inst.pi[from] == 0.0 {
                    m[from][from] = 1.0;
                    continue;
                }
                let p_from = inst.block_proposal_prob(from);
                for to in 0..n {
                    let p_to = inst.block_proposal_prob(to);
                    if p_to == 0.0 {
                        continue;
                    }
                    let alpha = if inst.pi[to] == 0.0 {
                        0.0
                    } else {
                        (inst.pi[to] * p_from / (inst.pi[from] * p_to)).min(1.0)
                    };
                    m[from][to] += p_to * alpha;
                    m[from][from] += p_to * (1.0 - alpha);
                }
            }
            m
        }
    };
    check_stochastic(&m)?;
    Ok(m)
}

fn check_stochastic(m: &Matrix) -> Result<()> {
    for (i, row) in m.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Consistency(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let v = a[i][k];
            if v == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += v * b[k][j];
            }
        }
    }
    out
}

pub fn row_vec_mul(v: &[f64], m: &Matrix) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let w = v[i];
        if w == 0.0 {
            continue;
        }
        for j in 0..n {
            out[j] += w * m[i][j];
        }
    }
    out
}

/// Entrywise matrix power.
pub fn mat_pow(m: &Matrix, k: u32) -> Matrix {
    let n = m.len();
    let mut acc: Matrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..k {
        acc = mat_mul(&acc, m);
    }
    acc
}

/// Stationary distribution by power iteration to sup-norm 1e-13,
/// cross-checked against the instance's target.
pub fn stationary_vector(inst: &DiscreteInstance, kernel: &Matrix) -> Result<Vec<f64>> {
    let mut v = inst.pi.clone();
    for _ in 0..200_000 {
        let next = row_vec_mul(&v, kernel);
        let diff = v
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = next;
        if diff <= 1e-13 {
            let err = v
                .iter()
                .zip(&inst.pi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if err > 1e-8 {
                return Err(Error::Consistency(format!(
                    "stationary vector deviates from pi by {err}"
                )));
            }
            return Ok(v);
        }
    }
    Err(Error::Consistency("power iteration did not converge".into()))
}

/// Exact total-variation distances `||P^n(start, .) - pi||` for `n = 1..=n_max`.
pub fn exact_tv_curve(
    inst: &DiscreteInstance,
    kernel: &Matrix,
    n_max: u32,
    start: usize,
) -> Result<Vec<f64>> {
    if start >= kernel.len() || inst.pi[start] == 0.0 {
        return Err(Error::Config(format!("start state {start} invalid")));
    }
    let pi = stationary_vector(inst, kernel)?;
    let mut dist = vec![0.0; kernel.len()];
    dist[start] = 1.0;
    let mut out = Vec::with_capacity(n_max as usize);
    for _ in 0..n_max {
        dist = row_vec_mul(&dist, kernel);
        let tv = 0.5
            * dist
                .iter()
                .zip(&pi)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        out.push(tv);
    }
    Ok(out)
}

/// Max over start states of the exact TV curve.
pub fn exact_tv_curve_sup(inst: &DiscreteInstance, kernel: &Matrix, n_max: u32) -> Result<Vec<f64>> {
    let mut sup = vec![0.0f64; n_max as usize];
    for start in 0..kernel.len() {
        if inst.pi[start] == 0.0 {
            continue;
        }
        let curve = exact_tv_curve(inst, kernel, n_max, start)?;
        for (s, c) in sup.iter_mut().zip(curve) {
            *s = s.max(c);
        }
    }
    Ok(sup)
}

/// Max violation of the split identity `f_acc(x,y) r(x,y) = s(x) q(y)` over
/// all state pairs. `q` must be a probability vector; the scale that
/// normalizes it belongs to `s`.
pub fn exact_split_identity_check(
    f_acc: &Matrix,
    regen: &Matrix,
    s: &[f64],
    q: &[f64],
) -> Result<f64> {
    let qs: f64 = q.iter().sum();
    if (qs - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("q sums to {qs}")));
    }
    if s.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
        return Err(Error::Config("s must take values in [0, 1]".into()));
    }
    let mut worst = 0.0f64;
    for (x, row) in f_acc.iter().enumerate() {
        for (y, &f) in row.iter().enumerate() {
            let lhs = f * regen[x][y];
            let rhs = s[x] * q[y];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Max violation of stationarity `pi^T P = pi^T`.
pub fn stationarity_violation(kernel: &Matrix, pi: &[f64]) -> f64 {
    let out = row_vec_mul(pi, kernel);
    out.iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Exhaustively computed bound constants.

/// Theorem-1 constant for a composition kernel, computed by exhaustive
/// minimization: with `eps_i = 1` and `q_i(y_head)` taken as the minimum of
/// the component transition density over the unseen coordinates,
/// `C = sum_y prod_i q_i(y_[i])`.
pub fn composition_minorization_constant(inst: &DiscreteInstance) -> Result<f64> {
    inst.validate()?;
    let d = inst.component_count();
    let sizes = inst.sizes();
    let n = inst.state_count();
    let order = inst.update_order();
    if order != (0..d).collect::<Vec<_>>() {
        return Err(Error::Config(
            "constant search assumes identity update order; permute the instance instead".into(),
        ));
    }

    // head_rank over components 0..=i
    let head_rank = |digits: &[usize], i: usize| -> usize {
        let mut r = 0;
        for k in 0..=i {
            r = r * sizes[k] + digits[k];
        }
        r
    };

    let mut mins: Vec<Vec<f64>> = (0..d)
        .map(|i| vec![f64::INFINITY; sizes[..=i].iter().product()])
        .collect();
    for comp in 0..d {
        let m = component_update_matrix(inst, comp)?;
        for from in 0..n {
            if inst.pi[from] == 0.0 {
                continue;
            }
            let digits = inst.unrank(from);
            for v in 0..sizes[comp] {
                let mut to_digits = digits.clone();
                to_digits[comp] = v;
                let to = inst.rank(&to_digits);
                // f_comp factor: the transition density of component `comp`
                // from `from`, landing value v. Heads (< comp) of `from` play
                // the role of y_head, the rest is minimized over.
                let f = m[from][to];
                let hr = head_rank(&to_digits, comp);
                let slot = &mut mins[comp][hr];
                *slot = slot.min(f);
            }
        }
    }
    let mut c = 0.0;
    for idx in 0..n {
        let digits = inst.unrank(idx);
        let mut prod = 1.0;
        for i in 0..d {
            prod *= mins[i][head_rank(&digits, i)];
        }
        c += prod;
    }
    if !(c > 0.0) {
        return Err(Error::Consistency("minorization constant vanished".into()));
    }
    Ok(c.min(1.0))
}

/// Largest `eps` with `P(x, .) >= eps Q(.)` for some probability `Q`,
/// computed from column minima.
pub fn kernel_minorization_constant(kernel: &Matrix) -> f64 {
    let n = kernel.len();
    (0..n)
        .map(|j| (0..n).map(|i| kernel[i][j]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Theorem-3 constants for a CWIS instance, by exhaustive search:
/// `delta = min p(x)/pi(x)` and `eps` the minimum four-point ratio over all
/// split positions and state pairs.
pub fn cwis_bound_constants(inst: &DiscreteInstance) -> Result<(f64, f64)> {
    inst.validate()?;
    let n = inst.state_count();
    let d = inst.component_count();
    let mut delta = f64::INFINITY;
    for idx in 0..n {
        if inst.pi[idx] == 0.0 {
            continue;
        }
        delta = delta.min(inst.block_proposal_prob(idx) / inst.pi[idx]);
    }
    let mut eps = f64::INFINITY;
    for split in 1..d {
        for x in 0..n {
            if inst.pi[x] == 0.0 {
                continue;
            }
            let xd = inst.unrank(x);
            for y in 0..n {
                if inst.pi[y] == 0.0 {
                    continue;
                }
                let yd = inst.unrank(y);
                let mut xy = xd.clone();
                xy[split..].copy_from_slice(&yd[split..]);
                let mut yx = yd.clone();
                yx[split..].copy_from_slice(&xd[split..]);
                let num = inst.pi[x] * inst.pi[y];
                let den = inst.pi[inst.rank(&xy)] * inst.pi[inst.rank(&yx)];
                if den == 0.0 {
                    return Err(Error::Consistency(
                        "four-point condition fails: mixed state has zero density".into(),
                    ));
                }
                eps = eps.min(num / den);
            }
        }
    }
    if d == 1 {
        eps = 1.0;
    }
    Ok((delta.min(1.0), eps.min(1.0)))
}

// ---------------------------------------------------------------------------
// Adapters into the generic sampler machinery.

/// Runs the generic chain machinery on a discrete instance.
#[derive(Debug, Clone)]
pub struct InstanceTarget {
    supports: Vec<Vec<f64>>,
    sizes: Vec<usize>,
    log_pi: Vec<f64>,
}

impl InstanceTarget {
    pub fn new(inst: &DiscreteInstance) -> Self {
        Self {
            supports: inst.supports.clone(),
            sizes: inst.sizes(),
            log_pi: inst.pi.iter().map(|&p| p.ln()).collect(),
        }
    }

    fn digit(&self, comp: usize, value: f64) -> Option<usize> {
        self.supports[comp].iter().position(|&v| v == value)
    }

    fn rank(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (i, &v) in x.iter().enumerate() {
            idx = idx * self.sizes[i] + self.digit(i, v)?;
        }
        Some(idx)
    }
}

impl Target for InstanceTarget {
    fn component_count(&self) -> usize {
        self.sizes.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self.rank(x) {
            Some(idx) => self.log_pi[idx],
            None => f64::NEG_INFINITY,
        }
    }

    fn component_in_support(&self, index: usize, value: &[f64]) -> bool {
        self.digit(index, value[0]).is_some()
    }
}

/// State-independent table proposal for one component of an instance.
pub struct TableProposal {
    index: usize,
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl TableProposal {
    pub fn new(inst: &DiscreteInstance, index: usize) -> Self {
        Self {
            index,
            values: inst.supports[index].clone(),
            probs: inst.proposals[index].clone(),
        }
    }
}

impl ComponentProposal for TableProposal {
    fn index(&self) -> usize {
        self.index
    }

    fn propose(&self, _x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (v, p) in self.values.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return Ok(vec![*v]);
            }
        }
        Ok(vec![*self.values.last().expect("nonempty table")])
    }

    fn log_density(&self, _x: &[f64], candidate: &[f64]) -> f64 {
        match self.values.iter().position(|&v| v == candidate[0]) {
            Some(k) => self.probs[k].ln(),
            None => f64::NEG_INFINITY,
        }
    }

    fn state_independent(&self) -> bool {
        true
    }
}

/// Product-table proposal over the full state.
pub struct ProductProposal {
    components: Vec<TableProposal>,
}

impl ProductProposal {
    pub fn new(inst: &DiscreteInstance) -> Self {
        Self {
            components: (0..inst.component_count())
                .map(|i| TableProposal::new(inst, i))
                .collect(),
        }
    }
}

impl Proposal for ProductProposal {
    fn propose(&self, _x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.components.len());
        for c in &self.components {
            out.push(c.propose(_x, rng)?[0]);
        }
        Ok(out)
    }

    fn log_density(&self, _from: &[f64], to: &[f64]) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| c.log_density(_from, &to[i..=i]))
            .sum()
    }

    fn state_independent(&self) -> bool {
        true
    }
}

pub fn component_proposals(inst: &DiscreteInstance) -> Vec<Box<dyn ComponentProposal>> {
    (0..inst.component_count())
        .map(|i| Box::new(TableProposal::new(inst, i)) as Box<dyn ComponentProposal>)
        .collect()
}

// ---------------------------------------------------------------------------
// Split-identity machinery on instances.

/// All-accepted path density of the single-block independence sampler:
/// `f_acc(x, y) = p(y) alpha(x, y)`.
pub fn block_accept_density(inst: &DiscreteInstance) -> Result<Matrix> {
    inst.validate()?;
    let n = inst.state_count();
    let mut m = vec![vec![0.0; n]; n];
    for x in 0..n {
        if inst.pi[x] == 0.0 {
            continue;
        }
        let p_x = inst.block_proposal_prob(x);
        for y in 0..n {
            let p_y = inst.block_proposal_prob(y);
            if p_y == 0.0 {
                continue;
            }
            let alpha = (inst.pi[y] * p_x / (inst.pi[x] * p_y)).min(1.0);
            m[x][y] = p_y * alpha;
        }
    }
    Ok(m)
}

/// All-accepted path density of the composition sampler:
/// `f_acc(x, y) = prod_i p_i(y_i) alpha_i((y_head, x_tail), y_i)`.
pub fn cwis_accept_density(inst: &DiscreteInstance) -> Result<Matrix> {
    inst.validate()?;
    let n = inst.state_count();
    let d = inst.component_count();
    let mut m = vec![vec![0.0; n]; n];
    for x in 0..n {
        if inst.pi[x] == 0.0 {
            continue;
        }
        let xd = inst.unrank(x);
        for y in 0..n {
            if inst.pi[y] == 0.0 {
                m[x][y] = 0.0;
                continue;
            }
            let yd = inst.unrank(y);
            let mut prod = 1.0;
            let mut mid = xd.clone();
            for i in 0..d {
                let from = inst.rank(&mid);
                let mut to_digits = mid.clone();
                to_digits[i] = yd[i];
                let to = inst.rank(&to_digits);
                let p_cand = inst.proposals[i][yd[i]];
                let p_cur = inst.proposals[i][mid[i]];
                let alpha = (inst.pi[to] * p_cur / (inst.pi[from] * p_cand)).min(1.0);
                prod *= p_cand * alpha;
                mid = to_digits;
            }
            m[x][y] = prod;
        }
    }
    Ok(m)
}

/// `(s, q, log_c)` of the three-case construction on an instance, scaled so
/// `q` is a probability vector.
pub fn mty_split_parts(inst: &DiscreteInstance, log_c: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    inst.validate()?;
    let n = inst.state_count();
    let c = log_c.exp();
    let mut s = vec![0.0; n];
    let mut q = vec![0.0; n];
    for idx in 0..n {
        if inst.pi[idx] == 0.0 {
            continue;
        }
        let p = inst.block_proposal_prob(idx);
        let w = inst.pi[idx] / p;
        s[idx] = (c / w).min(1.0);
        q[idx] = p.min(inst.pi[idx] / c);
    }
    let z: f64 = q.iter().sum();
    for v in &mut q {
        *v /= z;
    }
    for v in &mut s {
        *v *= z;
    }
    Ok((s, q))
}

/// Regeneration-probability matrix of the three-case rule on an instance.
pub fn mty_regen_matrix(inst: &DiscreteInstance, log_c: f64) -> Result<Matrix> {
    inst.validate()?;
    let n = inst.state_count();
    let log_w: Vec<f64> = (0..n)
        .map(|idx| {
            if inst.pi[idx] == 0.0 {
                f64::NEG_INFINITY
            } else {
                inst.pi[idx].ln() - inst.block_proposal_prob(idx).ln()
            }
        })
        .collect();
    let mut m = vec![vec![0.0; n]; n];
    for x in 0..n {
        if inst.pi[x] == 0.0 {
            continue;
        }
        for y in 0..n {
            if inst.pi[y] == 0.0 {
                continue;
            }
            m[x][y] = mty_regen_prob(log_w[x], log_w[y], log_c);
        }
    }
    Ok(m)
}

/// Exhaustive minorization functions for the component-wise split chain of a
/// discrete instance: `g1` is the head-indexed minimum of `r_i = pi / p_i`,
/// `h2` the tail-indexed maximum, with `g2 = h1 = 1` and `c_i = 1`.
pub fn cwis_minorization_spec(inst: &DiscreteInstance) -> Result<MinorizationSpec> {
    inst.validate()?;
    let d = inst.component_count();
    let sizes = inst.sizes();
    let n = inst.state_count();

    let head_rank = move |digits: &[usize], upto: usize, sizes: &[usize]| -> usize {
        let mut r = 0;
        for k in 0..=upto {
            r = r * sizes[k] + digits[k];
        }
        r
    };
    let tail_rank = move |digits: &[usize], from: usize, sizes: &[usize]| -> usize {
        let mut r = 0;
        for k in from..sizes.len() {
            r = r * sizes[k] + digits[k];
        }
        r
    };

    let mut components = Vec::with_capacity(d);
    for i in 0..d {
        let head_states: usize = sizes[..=i].iter().product();
        let tail_states: usize = sizes[i..].iter().product();
        let mut g1 = vec![f64::INFINITY; head_states];
        let mut h2 = vec![f64::NEG_INFINITY; tail_states];
        for idx in 0..n {
            if inst.pi[idx] == 0.0 {
                continue;
            }
            let digits = inst.unrank(idx);
            let r_i = inst.pi[idx] / inst.proposals[i][digits[i]];
            let hr = head_rank(&digits, i, &sizes);
            let tr = tail_rank(&digits, i, &sizes);
            g1[hr] = g1[hr].min(r_i);
            h2[tr] = h2[tr].max(r_i);
        }

        let supports = inst.supports.clone();
        let sizes_c = sizes.clone();
        let digitize = move |x: &[f64]| -> Vec<usize> {
            x.iter()
                .enumerate()
                .map(|(k, &v)| {
                    supports[k]
                        .iter()
                        .position(|&s| s == v)
                        .expect("state off the support")
                })
                .collect()
        };

        let g1_fn = {
            let digitize = digitize.clone();
            let sizes = sizes_c.clone();
            move |x: &[f64]| -> f64 {
                let digits = digitize(x);
                let mut r = 0;
                for k in 0..=i {
                    r = r * sizes[k] + digits[k];
                }
                g1[r].ln()
            }
        };
        let h2_fn = {
            let digitize = digitize.clone();
            let sizes = sizes_c.clone();
            move |x: &[f64]| -> f64 {
                let digits = digitize(x);
                let mut r = 0;
                for k in i..sizes.len() {
                    r = r * sizes[k] + digits[k];
                }
                h2[r].ln()
            }
        };

        components.push(ComponentMinorization {
            log_s: Box::new(|_| 0.0),
            log_q: None,
            log_g1: Box::new(g1_fn),
            log_g2: Box::new(|_| 0.0),
            log_h1: Box::new(|_| 0.0),
            log_h2: Box::new(h2_fn),
            log_c: 0.0,
        });
    }
    Ok(MinorizationSpec { components })
}

/// `(s, q)` vectors of the component-wise split construction on an instance,
/// scaled so `q` is a probability vector.
pub fn cwis_split_parts(
    inst: &DiscreteInstance,
    spec: &MinorizationSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    inst.validate()?;
    let n = inst.state_count();
    let d = inst.component_count();
    let mut s = vec![0.0; n];
    let mut q = vec![0.0; n];
    for idx in 0..n {
        if inst.pi[idx] == 0.0 {
            continue;
        }
        let x = inst.state_values(idx);
        let digits = inst.unrank(idx);
        let mut log_s = 0.0;
        let mut log_q = 0.0;
        for (i, comp) in spec.components.iter().enumerate() {
            log_s += (comp.log_s)(&x)
                + ((comp.log_g2)(&x) - comp.log_c - (comp.log_h2)(&x)).min(0.0);
            let lq = match &comp.log_q {
                Some(f) => f(&x),
                None => inst.proposals[i][digits[i]].ln(),
            };
            log_q += lq + (comp.log_c + (comp.log_g1)(&x) - (comp.log_h1)(&x)).min(0.0);
        }
        s[idx] = log_s.exp();
        q[idx] = log_q.exp();
    }
    let z: f64 = q.iter().sum();
    for v in &mut q {
        *v /= z;
    }
    for v in &mut s {
        *v *= z;
    }
    Ok((s, q))
}

/// Regeneration matrix of the component-wise rule via the generic
/// implementation (exercises the same code path the split chain uses).
pub fn cwis_regen_matrix(inst: &DiscreteInstance, spec: &MinorizationSpec) -> Result<Matrix> {
    inst.validate()?;
    let n = inst.state_count();
    let target = InstanceTarget::new(inst);
    let proposals = component_proposals(inst);
    let mut m = vec![vec![0.0; n]; n];
    for x in 0..n {
        if inst.pi[x] == 0.0 {
            continue;
        }
        let xv = inst.state_values(x);
        for y in 0..n {
            if inst.pi[y] == 0.0 {
                continue;
            }
            let yv = inst.state_values(y);
            m[x][y] = crate::regen::cwis_regen_prob(&target, &proposals, spec, &xv, &yv)?;
        }
    }
    Ok(m)
}

/// Random strictly-positive instance for property tests and experiments.
pub fn random_instance(rng: &mut RandomStream, sizes: &[usize]) -> DiscreteInstance {
    let supports: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&s| (0..s).map(|k| k as f64).collect())
        .collect();
    let n: usize = sizes.iter().product();
    let mut pi: Vec<f64> = (0..n).map(|_| -rng.uniform().max(1e-12).ln()).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= z);
    let proposals: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&s| {
            let mut p: Vec<f64> = (0..s).map(|_| 0.05 + rng.uniform()).collect();
            let z: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= z);
            p
        })
        .collect();
    DiscreteInstance { supports, pi, proposals, order: None, weights: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_instance() -> DiscreteInstance {
        // 2 binary components; pi prop to (1, 2, 3, 4) over (00, 01, 10, 11)
        DiscreteInstance {
            supports: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            pi: vec![0.1, 0.2, 0.3, 0.4],
            proposals: vec![vec![0.4, 0.6], vec![0.7, 0.3]],
            order: None,
            weights: None,
        }
    }

    #[test]
    fn bound_calculator_examples() {
        assert_eq!(tv_bound_composition(&[1.0], 1.0, 1).unwrap(), 0.0);
        assert_relative_eq!(
            tv_bound_composition(&[0.5, 0.5], 0.8, 2).unwrap(),
            0.64,
            max_relative = 1e-15
        );
        assert_eq!(tv_bound_mixing(1.0, &[1.0], 1).unwrap(), 0.0);
        assert_relative_eq!(
            tv_bound_mixing(0.5, &[0.5, 0.5], 3).unwrap(),
            0.669921875,
            max_relative = 1e-15
        );
        assert_eq!(tv_bound_cwis(1.0, 1.0, 7, 1).unwrap(), 0.0);
        assert_relative_eq!(
            tv_bound_cwis(0.5, 0.25, 5, 1).unwrap(),
            0.96875,
            max_relative = 1e-15
        );
        assert!(tv_bound_cwis(0.0, 0.5, 2, 1).is_err());
        assert!(tv_bound_composition(&[1.2], 1.0, 1).is_err());
    }

    #[test]
    fn bounds_tend_to_one_in_dimension() {
        let mut last = 0.0;
        for d in 1..30u32 {
            let eps = vec![0.9; d as usize];
            let b = tv_bound_composition(&eps, 0.9, 1).unwrap();
            assert!(b >= last);
            last = b;
        }
        assert!(last > 0.9);
    }

    #[test]
    fn equal_weights_give_tightest_mixing_bound() {
        let eps = 0.4;
        let best = tv_bound_mixing(eps, &[0.5, 0.5], 4).unwrap();
        for w in [[0.2, 0.8], [0.35, 0.65], [0.45, 0.55]] {
            assert!(tv_bound_mixing(eps, &w, 4).unwrap() >= best);
        }
    }

    #[test]
    fn kernel_rows_are_stochastic_and_stationary() {
        let inst = small_instance();
        for kind in [
            KernelKind::Composition,
            KernelKind::Mixing,
            KernelKind::Cwis,
            KernelKind::SingleBlockIndependence,
        ] {
            let m = exact_kernel_matrix(&inst, kind).unwrap();
            assert!(stationarity_violation(&m, &inst.pi) < 1e-13, "{kind:?}");
        }
    }

    #[test]
    fn composition_order_preserves_stationarity() {
        let mut inst = small_instance();
        inst.order = Some(vec![1, 0]);
        let m = exact_kernel_matrix(&inst, KernelKind::Composition).unwrap();
        assert!(stationarity_violation(&m, &inst.pi) < 1e-13);
        let identity_order = exact_kernel_matrix(&small_instance(), KernelKind::Composition).unwrap();
        // the kernels differ even though both preserve pi
        let diff: f64 = m
            .iter()
            .flatten()
            .zip(identity_order.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(diff > 1e-6);
    }

    #[test]
    fn proposal_equal_to_factorized_target_gives_pi_rows() {
        // independent target; proposals equal to the marginals
        let inst = DiscreteInstance {
            supports: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            pi: vec![0.4 * 0.7, 0.4 * 0.3, 0.6 * 0.7, 0.6 * 0.3],
            proposals: vec![vec![0.4, 0.6], vec![0.7, 0.3]],
            order: None,
            weights: None,
        };
        let m = exact_kernel_matrix(&inst, KernelKind::Cwis).unwrap();
        for row in &m {
            for (v, p) in row.iter().zip(&inst.pi) {
                assert_relative_eq!(v, p, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn mixing_matrix_is_weighted_sum() {
        let mut inst = small_instance();
        inst.weights = Some(vec![0.25, 0.75]);
        let m = exact_kernel_matrix(&inst, KernelKind::Mixing).unwrap();
        let m0 = component_update_matrix(&inst, 0).unwrap();
        let m1 = component_update_matrix(&inst, 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(
                    m[i][j],
                    0.25 * m0[i][j] + 0.75 * m1[i][j],
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn hand_enumerated_two_by_two() {
        // Component update for comp 0 from state (0,0) with the
        // small_instance tables, worked by hand:
        //   candidate 1 w.p. 0.6, alpha = min(1, pi(10) p(0) / (pi(00) p(1)))
        //     = min(1, 0.3*0.4/(0.1*0.6)) = 1 -> mass 0.6 to (1,0)
        //   candidate 0 w.p. 0.4, self move -> diagonal 0.4
        let inst = small_instance();
        let m0 = component_update_matrix(&inst, 0).unwrap();
        assert_relative_eq!(m0[0][2], 0.6, max_relative = 1e-15);
        assert_relative_eq!(m0[0][0], 0.4, max_relative = 1e-15);
        // From (1,1): candidate 0 w.p. 0.4, alpha = min(1, pi(01) p(1)/(pi(11) p(0)))
        //   = min(1, 0.2*0.6/(0.4*0.4)) = 0.75 -> mass 0.3 to (0,1), diag 0.7
        assert_relative_eq!(m0[3][1], 0.4 * 0.75, max_relative = 1e-15);
        assert_relative_eq!(m0[3][3], 0.6 + 0.4 * 0.25, max_relative = 1e-15);
    }

    #[test]
    fn tv_curve_zero_when_started_at_pi_rows() {
        // kernel rows all equal to pi -> TV = 0 from n = 1
        let inst = DiscreteInstance {
            supports: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            pi: vec![0.4 * 0.7, 0.4 * 0.3, 0.6 * 0.7, 0.6 * 0.3],
            proposals: vec![vec![0.4, 0.6], vec![0.7, 0.3]],
            order: None,
            weights: None,
        };
        let m = exact_kernel_matrix(&inst, KernelKind::Cwis).unwrap();
        let curve = exact_tv_curve(&inst, &m, 5, 0).unwrap();
        for v in curve {
            assert!(v < 1e-14);
        }
    }

    #[test]
    fn tv_curve_below_cwis_bound_on_random_instances() {
        let mut rng = RandomStream::new(2024, 0);
        for trial in 0..20 {
            let inst = random_instance(&mut rng, &[3, 3]);
            let m = exact_kernel_matrix(&inst, KernelKind::Cwis).unwrap();
            let (delta, eps) = cwis_bound_constants(&inst).unwrap();
            let curve = exact_tv_curve_sup(&inst, &m, 30).unwrap();
            for (k, tv) in curve.iter().enumerate() {
                let bound = tv_bound_cwis(delta, eps, 2, k as u32 + 1).unwrap();
                assert!(
                    *tv <= bound + 1e-12,
                    "trial {trial} n={} tv={tv} bound={bound}",
                    k + 1
                );
            }
        }
    }

    #[test]
    fn split_identity_holds_for_mty_on_small_instance() {
        let inst = small_instance();
        let log_c = 0.2f64.ln(); // arbitrary positive constant
        let f_acc = block_accept_density(&inst).unwrap();
        let regen = mty_regen_matrix(&inst, log_c).unwrap();
        let (s, q) = mty_split_parts(&inst, log_c).unwrap();
        let viol = exact_split_identity_check(&f_acc, &regen, &s, &q).unwrap();
        assert!(viol <= 1e-10, "violation {viol}");
    }

    #[test]
    fn split_identity_holds_for_cwis_on_small_instance() {
        let inst = small_instance();
        let spec = cwis_minorization_spec(&inst).unwrap();
        let f_acc = cwis_accept_density(&inst).unwrap();
        let regen = cwis_regen_matrix(&inst, &spec).unwrap();
        let (s, q) = cwis_split_parts(&inst, &spec).unwrap();
        let viol = exact_split_identity_check(&f_acc, &regen, &s, &q).unwrap();
        assert!(viol <= 1e-10, "violation {viol}");
    }

    #[test]
    fn zero_s_gives_zero_violation() {
        let inst = small_instance();
        let f_acc = block_accept_density(&inst).unwrap();
        let zero = vec![vec![0.0; 4]; 4];
        let s = vec![0.0; 4];
        let q = vec![0.25; 4];
        let viol = exact_split_identity_check(&f_acc, &zero, &s, &q).unwrap();
        assert_eq!(viol, 0.0);
    }

    #[test]
    fn size_guard_trips() {
        let sizes = vec![vec![0.0; 101], vec![0.0; 101]];
        let inst = DiscreteInstance {
            supports: sizes,
            pi: vec![1.0 / 10201.0; 10201],
            proposals: vec![vec![1.0 / 101.0; 101], vec![1.0 / 101.0; 101]],
            order: None,
            weights: None,
        };
        assert!(matches!(
            inst.validate(),
            Err(Error::SizeLimit { .. })
        ));
    }
}
