//! Bayesian normal-model posterior with truncated supports, its independence
//! samplers, and a quadrature oracle for the target functional.
//!
//! The posterior over `(mu, theta)` is proportional to
//! `theta^{-(m+1)/2} exp{-[s2 + m (mu - y_bar)^2] / (2 theta)}` on `A x B`,
//! with `A` a bounded interval and `B` bounded below. Proposals are the
//! truncated normal `N(y_bar, s2/m)` on `A` and the truncated inverse gamma
//! `IG((m-1)/2, s2/2)` on `B`, so state-independent updates admit closed-form
//! acceptance probabilities and regeneration machinery.

use crate::chain::{ComponentProposal, Proposal, Target};
use crate::error::{Error, Result};
use crate::quad;
use crate::regen::{ComponentMinorization, MinorizationSpec};
use crate::stream::RandomStream;
use serde::{Deserialize, Serialize};

/// Cap on consecutive rejection-sampler misses.
const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct ToyModel {
    pub m: u32,
    pub y_bar: f64,
    pub s2: f64,
    /// Bounded support of `mu`.
    pub a: (f64, f64),
    /// Support of `theta`; the upper end may be infinite.
    pub b: (f64, f64),
}

impl ToyModel {
    pub fn new(m: u32, y_bar: f64, s2: f64, a: (f64, f64), b: (f64, f64)) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if !(s2 > 0.0) {
            return Err(Error::Config("s2 must be positive".into()));
        }
        if !(a.0 < a.1) || !a.0.is_finite() || !a.1.is_finite() {
            return Err(Error::Config("A must be a bounded interval".into()));
        }
        if !(b.0 >= 0.0 && (b.1 > b.0)) {
            return Err(Error::Config("B must satisfy 0 <= lo < hi".into()));
        }
        Ok(Self { m, y_bar, s2, a, b })
    }

    /// The `m = 10, y_bar = 10.2, s2 = 6.5` configuration with
    /// `A = (0, 100)` and `B = (0.01, inf)` used by the component-wise runs.
    pub fn default_cwis() -> Self {
        Self::new(10, 10.2, 6.5, (0.0, 100.0), (0.01, f64::INFINITY)).unwrap()
    }

    /// Same data with `B = (0, inf)`, the single-block sampler's support.
    pub fn default_mhis() -> Self {
        Self::new(10, 10.2, 6.5, (0.0, 100.0), (0.0, f64::INFINITY)).unwrap()
    }

    /// Endpoint of `A` farthest from `y_bar`.
    pub fn mu_tilde(&self) -> f64 {
        if (self.a.0 - self.y_bar).abs() > (self.a.1 - self.y_bar).abs() {
            self.a.0
        } else {
            self.a.1
        }
    }

    pub fn in_a(&self, mu: f64) -> bool {
        self.a.0 < mu && mu < self.a.1
    }

    pub fn in_b(&self, theta: f64) -> bool {
        self.b.0 < theta && theta < self.b.1
    }

    /// Unnormalized log posterior.
    pub fn log_target(&self, mu: f64, theta: f64) -> f64 {
        if !self.in_a(mu) || !self.in_b(theta) {
            return f64::NEG_INFINITY;
        }
        let m = self.m as f64;
        -0.5 * (m + 1.0) * theta.ln()
            - (self.s2 + m * (mu - self.y_bar).powi(2)) / (2.0 * theta)
    }

    /// Closed-form acceptance for the single-block independence sampler.
    pub fn mhis_accept(&self, mu: f64, theta: f64, mu_s: f64, theta_s: f64) -> f64 {
        let m = self.m as f64;
        let e = -(m / 2.0)
            * ((1.0 / self.s2 - 1.0 / theta) * (mu - self.y_bar).powi(2)
                - (1.0 / self.s2 - 1.0 / theta_s) * (mu_s - self.y_bar).powi(2));
        e.min(0.0).exp()
    }

    /// Closed-form acceptance of the `mu` update.
    pub fn cwis_accept_mu(&self, mu: f64, mu_s: f64, theta: f64) -> f64 {
        let m = self.m as f64;
        let e = -(m / 2.0)
            * (1.0 / self.s2 - 1.0 / theta)
            * ((mu - self.y_bar).powi(2) - (mu_s - self.y_bar).powi(2));
        e.min(0.0).exp()
    }

    /// Closed-form acceptance of the `theta` update.
    pub fn cwis_accept_theta(&self, theta: f64, theta_s: f64, mu: f64) -> f64 {
        let m = self.m as f64;
        let e = -(m / 2.0) * (1.0 / theta_s - 1.0 / theta) * (mu - self.y_bar).powi(2);
        e.min(0.0).exp()
    }

    /// `log(pi / p_1)` in the fixed display scale (proposal constants dropped).
    pub fn log_r1(&self, mu: f64, theta: f64) -> f64 {
        let m = self.m as f64;
        -0.5 * (m + 1.0) * theta.ln() - self.s2 / (2.0 * theta)
            - (m / 2.0) * (1.0 / theta - 1.0 / self.s2) * (mu - self.y_bar).powi(2)
    }

    /// `log(pi / p_2)` in the same scale; always at most 0.
    pub fn log_r2(&self, mu: f64, theta: f64) -> f64 {
        let m = self.m as f64;
        -(m / (2.0 * theta)) * (mu - self.y_bar).powi(2)
    }

    /// Lower-bound factor `g_1(mu)` of the `r_1` sandwich.
    pub fn log_g1(&self, mu: f64, theta_tilde: f64) -> f64 {
        let m = self.m as f64;
        -(m / 2.0) * (1.0 / theta_tilde - 1.0 / self.s2) * (mu - self.y_bar).powi(2)
    }

    /// Lower-bound factor `g_2(theta)`, zero at or below the cutoff.
    pub fn log_g2(&self, theta: f64, theta_tilde: f64) -> f64 {
        if theta <= theta_tilde {
            return f64::NEG_INFINITY;
        }
        let m = self.m as f64;
        -0.5 * (m + 1.0) * theta.ln() - self.s2 / (2.0 * theta)
    }

    /// `log(pi / p)` for the single-block sampler in the display scale; the
    /// theta factors of target and proposal cancel exactly.
    pub fn log_w(&self, mu: f64, theta: f64) -> f64 {
        let m = self.m as f64;
        -(m / 2.0) * (1.0 / theta - 1.0 / self.s2) * (mu - self.y_bar).powi(2)
    }

    /// Four-point ratio lower bound `exp{-m (mu_tilde - y_bar)^2 / (2 theta_*)}`,
    /// available when `B` is bounded away from zero.
    pub fn four_point_epsilon(&self) -> Result<f64> {
        if !(self.b.0 > 0.0) {
            return Err(Error::Config("epsilon requires B bounded below away from 0".into()));
        }
        let m = self.m as f64;
        Ok((-(m * (self.mu_tilde() - self.y_bar).powi(2)) / (2.0 * self.b.0)).exp())
    }
}

impl Target for ToyModel {
    fn component_count(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_target(x[0], x[1])
    }

    fn component_in_support(&self, index: usize, value: &[f64]) -> bool {
        match index {
            0 => self.in_a(value[0]),
            _ => self.in_b(value[0]),
        }
    }
}

/// Rejection sampler for `N(mean, sd^2)` restricted to `(lo, hi)`.
pub fn sample_truncated_normal(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut RandomStream,
) -> Result<f64> {
    for _ in 0..MAX_REJECTIONS {
        let x = rng.normal(mean, sd);
        if lo < x && x < hi {
            return Ok(x);
        }
    }
    Err(Error::PathologicalTruncation(MAX_REJECTIONS))
}

/// Rejection sampler for the inverse gamma with the given shape and rate,
/// restricted to `(lo, hi)`.
pub fn sample_truncated_inv_gamma(
    shape: f64,
    rate: f64,
    lo: f64,
    hi: f64,
    rng: &mut RandomStream,
) -> Result<f64> {
    for _ in 0..MAX_REJECTIONS {
        let x = 1.0 / rng.gamma(shape, 1.0 / rate);
        if lo < x && x < hi {
            return Ok(x);
        }
    }
    Err(Error::PathologicalTruncation(MAX_REJECTIONS))
}

/// Truncated-normal proposal for `mu` (component 0).
pub struct MuProposal {
    pub model: ToyModel,
}

impl ComponentProposal for MuProposal {
    fn index(&self) -> usize {
        0
    }

    fn propose(&self, _x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        let m = &self.model;
        let sd = (m.s2 / m.m as f64).sqrt();
        Ok(vec![sample_truncated_normal(m.y_bar, sd, m.a.0, m.a.1, rng)?])
    }

    fn log_density(&self, _x: &[f64], candidate: &[f64]) -> f64 {
        let m = &self.model;
        if !m.in_a(candidate[0]) {
            return f64::NEG_INFINITY;
        }
        -(m.m as f64 / (2.0 * m.s2)) * (candidate[0] - m.y_bar).powi(2)
    }

    fn state_independent(&self) -> bool {
        true
    }
}

/// Truncated-inverse-gamma proposal for `theta` (component 1).
pub struct ThetaProposal {
    pub model: ToyModel,
}

impl ComponentProposal for ThetaProposal {
    fn index(&self) -> usize {
        1
    }

    fn propose(&self, _x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        let m = &self.model;
        let shape = (m.m as f64 - 1.0) / 2.0;
        Ok(vec![sample_truncated_inv_gamma(shape, m.s2 / 2.0, m.b.0, m.b.1, rng)?])
    }

    fn log_density(&self, _x: &[f64], candidate: &[f64]) -> f64 {
        let m = &self.model;
        let th = candidate[0];
        if !m.in_b(th) {
            return f64::NEG_INFINITY;
        }
        -0.5 * (m.m as f64 + 1.0) * th.ln() - m.s2 / (2.0 * th)
    }

    fn state_independent(&self) -> bool {
        true
    }
}

/// Product proposal of the single-block independence sampler.
pub struct ToyBlockProposal {
    pub model: ToyModel,
}

impl Proposal for ToyBlockProposal {
    fn propose(&self, _x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        let m = &self.model;
        let sd = (m.s2 / m.m as f64).sqrt();
        let mu = sample_truncated_normal(m.y_bar, sd, m.a.0, m.a.1, rng)?;
        let shape = (m.m as f64 - 1.0) / 2.0;
        let th = sample_truncated_inv_gamma(shape, m.s2 / 2.0, m.b.0, m.b.1, rng)?;
        Ok(vec![mu, th])
    }

    fn log_density(&self, _from: &[f64], to: &[f64]) -> f64 {
        let m = &self.model;
        let (mu, th) = (to[0], to[1]);
        if !m.in_a(mu) || !m.in_b(th) {
            return f64::NEG_INFINITY;
        }
        -(m.m as f64 / (2.0 * m.s2)) * (mu - m.y_bar).powi(2)
            - 0.5 * (m.m as f64 + 1.0) * th.ln()
            - m.s2 / (2.0 * th)
    }

    fn state_independent(&self) -> bool {
        true
    }
}

pub fn component_proposals(model: &ToyModel) -> Vec<Box<dyn ComponentProposal>> {
    vec![
        Box::new(MuProposal { model: *model }),
        Box::new(ThetaProposal { model: *model }),
    ]
}

/// Minorization functions of the component-wise split chain, for a cutoff
/// `theta_tilde` inside `B`.
pub fn toy_minorization_spec(model: &ToyModel, theta_tilde: f64) -> Result<MinorizationSpec> {
    if !model.in_b(theta_tilde) {
        return Err(Error::Config(format!(
            "theta_tilde = {theta_tilde} outside B = ({}, {})",
            model.b.0, model.b.1
        )));
    }
    let m = *model;
    let mu_comp = ComponentMinorization {
        log_s: Box::new(|_| 0.0),
        log_q: None,
        log_g1: Box::new(move |y: &[f64]| m.log_g1(y[0], theta_tilde)),
        log_g2: Box::new(move |x: &[f64]| m.log_g2(x[1], theta_tilde)),
        log_h1: Box::new(|_| 0.0),
        log_h2: Box::new(move |x: &[f64]| m.log_r1(x[0], x[1])),
        log_c: 0.0,
    };
    let theta_comp = ComponentMinorization {
        log_s: Box::new(|_| 0.0),
        log_q: None,
        log_g1: Box::new(move |y: &[f64]| m.log_r2(y[0], y[1])),
        log_g2: Box::new(|_| 0.0),
        log_h1: Box::new(|_| 0.0),
        log_h2: Box::new(|_| 0.0),
        log_c: 0.0,
    };
    Ok(MinorizationSpec { components: vec![mu_comp, theta_comp] })
}

/// Closed-form regeneration probability of the component-wise split chain on
/// an all-accepted jump from `(mu_p, theta_p)` to `(mu, theta)`.
pub fn toy_cwis_regen_prob(
    model: &ToyModel,
    prev: (f64, f64),
    curr: (f64, f64),
    theta_tilde: f64,
) -> Result<f64> {
    let (mu_p, th_p) = prev;
    let (mu, th) = curr;
    let num1 = (model.log_g2(th_p, theta_tilde) - model.log_r1(mu_p, th_p)).min(0.0)
        + model.log_g1(mu, theta_tilde).min(0.0);
    let den1 = (model.log_r1(mu, th_p) - model.log_r1(mu_p, th_p)).min(0.0);
    let num2 = model.log_r2(mu, th).min(0.0);
    let den2 = (model.log_r2(mu, th) - model.log_r2(mu, th_p)).min(0.0);
    let log_p = (num1 - den1) + (num2 - den2);
    if log_p > 1e-9 {
        return Err(Error::MinorizationViolation { factor: log_p.exp(), component: 0 });
    }
    Ok(log_p.min(0.0).exp())
}

/// Preliminary-run calibration of the single-block regeneration constant:
/// the median of `log(pi/p)` along an independence-sampler run.
pub fn calibrate_mty_log_c(model: &ToyModel, steps: usize, rng: &mut RandomStream) -> Result<f64> {
    let proposal = ToyBlockProposal { model: *model };
    let mut state = crate::chain::ChainState::new(model, vec![10.0, 1.0])?;
    let mut values = Vec::with_capacity(steps);
    for _ in 0..steps {
        crate::chain::mh_step(model, &mut state, &proposal, rng)?;
        values.push(model.log_w(state.x()[0], state.x()[1]));
    }
    Ok(median(&mut values))
}

/// Preliminary-run calibration of the component-wise cutoff: runs the
/// component-wise sampler, then picks the candidate cutoff (over a quantile
/// grid of visited `theta` values) that maximizes the average regeneration
/// probability. Maximizing the regeneration frequency is the same principle
/// the independence-sampler constant uses.
pub fn calibrate_theta_tilde(
    model: &ToyModel,
    steps: usize,
    rng: &mut RandomStream,
) -> Result<f64> {
    let proposals = component_proposals(model);
    let mut state = crate::chain::ChainState::new(model, vec![10.0, 1.0])?;
    let mut transitions = Vec::with_capacity(steps);
    let mut thetas = Vec::with_capacity(steps);
    for _ in 0..steps {
        let prev = (state.x()[0], state.x()[1]);
        let outs = crate::chain::composition_sweep(model, &mut state, &proposals, rng)?;
        let curr = (state.x()[0], state.x()[1]);
        let all = outs.iter().all(|o| o.accepted);
        transitions.push((prev, curr, all));
        thetas.push(curr.1);
    }
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (f64::NEG_INFINITY, model.b.0.max(1e-12));
    for k in 0..18 {
        let quantile = 0.02 + 0.68 * k as f64 / 17.0;
        let idx = ((thetas.len() - 1) as f64 * quantile).round() as usize;
        let tt = thetas[idx];
        if !model.in_b(tt) {
            continue;
        }
        let mut rate = 0.0;
        for &(prev, curr, all) in &transitions {
            if all {
                rate += toy_cwis_regen_prob(model, prev, curr, tt)?;
            }
        }
        rate /= transitions.len() as f64;
        if rate > best.0 {
            best = (rate, tt);
        }
    }
    if best.0 <= 0.0 {
        return Err(Error::InsufficientRegenerations);
    }
    Ok(best.1)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

// ---------------------------------------------------------------------------
// Quadrature oracle.

/// Posterior expectation `E[f(mu, theta) | y]` by nested adaptive quadrature.
pub fn posterior_expectation<F>(model: &ToyModel, f: F, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let m = model.m as f64;
    // Offset the theta factor by its value at the conditional mode so the
    // integrand stays in floating range for any m.
    let theta_hat = (model.s2 / (m + 1.0)).clamp(model.b.0.max(1e-12), 1e12);
    let log_scale = -0.5 * (m + 1.0) * theta_hat.ln() - model.s2 / (2.0 * theta_hat);

    let inner = |theta: f64, with_f: bool| -> Result<f64> {
        let sd = (theta / m).sqrt();
        let lo = model.a.0.max(model.y_bar - 12.0 * sd);
        let hi = model.a.1.min(model.y_bar + 12.0 * sd);
        if !(lo < hi) {
            return Ok(0.0);
        }
        let g = |mu: f64| {
            let dens = (-(m * (mu - model.y_bar).powi(2)) / (2.0 * theta)).exp();
            if with_f {
                dens * f(mu, theta)
            } else {
                dens
            }
        };
        quad::integrate_rel(&g, lo, Some(hi), rel_tol * 0.1)
    };

    let outer = |with_f: bool| -> Result<f64> {
        let g = |theta: f64| {
            if !model.in_b(theta) {
                return 0.0;
            }
            let log_t = -0.5 * (m + 1.0) * theta.ln() - model.s2 / (2.0 * theta) - log_scale;
            if log_t < -700.0 {
                return 0.0;
            }
            match inner(theta, with_f) {
                Ok(v) => log_t.exp() * v,
                Err(_) => f64::NAN,
            }
        };
        let v = if model.b.1.is_finite() {
            quad::integrate_rel(&g, model.b.0, Some(model.b.1), rel_tol)?
        } else {
            quad::integrate_rel(&g, model.b.0, None, rel_tol)?
        };
        if v.is_nan() {
            return Err(Error::Quadrature("inner integral failed".into()));
        }
        Ok(v)
    };

    let den = outer(false)?;
    if !(den > 0.0) {
        return Err(Error::Quadrature("posterior mass vanished".into()));
    }
    Ok(outer(true)? / den)
}

/// Posterior mean inverse coefficient of variation `E(mu / sqrt(theta) | y)`,
/// the coverage truth of the replication studies.
pub fn oracle_posterior_mean_icv(model: &ToyModel) -> Result<f64> {
    posterior_expectation(model, |mu, th| mu / th.sqrt(), 1e-8)
}

/// Uniform-ergodicity constant of the single-block sampler,
/// `delta = k exp{-m (mu_tilde - y_bar)^2 / (2 s2)}` with the normalizing
/// ratio `k` computed by quadrature.
pub fn mhis_uniform_ergodicity_delta(model: &ToyModel) -> Result<f64> {
    let m = model.m as f64;
    // Z_pi with the same scale offset as Z_p's theta factor.
    let theta_hat = (model.s2 / (m + 1.0)).clamp(model.b.0.max(1e-12), 1e12);
    let log_scale = -0.5 * (m + 1.0) * theta_hat.ln() - model.s2 / (2.0 * theta_hat);

    let z_pi = {
        let g = |theta: f64| {
            let log_t = -0.5 * (m + 1.0) * theta.ln() - model.s2 / (2.0 * theta) - log_scale;
            if log_t < -700.0 {
                return 0.0;
            }
            let sd = (theta / m).sqrt();
            let lo = model.a.0.max(model.y_bar - 12.0 * sd);
            let hi = model.a.1.min(model.y_bar + 12.0 * sd);
            if !(lo < hi) {
                return 0.0;
            }
            let inner = quad::integrate_rel(
                &|mu: f64| (-(m * (mu - model.y_bar).powi(2)) / (2.0 * theta)).exp(),
                lo,
                Some(hi),
                1e-10,
            )
            .unwrap_or(f64::NAN);
            log_t.exp() * inner
        };
        if model.b.1.is_finite() {
            quad::integrate_rel(&g, model.b.0, Some(model.b.1), 1e-9)?
        } else {
            quad::integrate_rel(&g, model.b.0, None, 1e-9)?
        }
    };

    let z_mu = {
        let sd = (model.s2 / m).sqrt();
        let lo = model.a.0.max(model.y_bar - 12.0 * sd);
        let hi = model.a.1.min(model.y_bar + 12.0 * sd);
        quad::integrate_rel(
            &|mu: f64| (-(m / (2.0 * model.s2)) * (mu - model.y_bar).powi(2)).exp(),
            lo,
            Some(hi),
            1e-10,
        )?
    };
    let z_theta = {
        let g = |theta: f64| {
            let log_t = -0.5 * (m + 1.0) * theta.ln() - model.s2 / (2.0 * theta) - log_scale;
            if log_t < -700.0 {
                0.0
            } else {
                log_t.exp()
            }
        };
        if model.b.1.is_finite() {
            quad::integrate_rel(&g, model.b.0, Some(model.b.1), 1e-9)?
        } else {
            quad::integrate_rel(&g, model.b.0, None, 1e-9)?
        }
    };

    let k = z_pi / (z_mu * z_theta);
    if z_pi.is_nan() || !(k > 0.0) {
        return Err(Error::Quadrature("normalizing-constant ratio failed".into()));
    }
    Ok(k * (-(m / (2.0 * model.s2)) * (model.mu_tilde() - model.y_bar).powi(2)).exp())
}

// ---------------------------------------------------------------------------
// Configuration.

/// `"auto"` or an explicit number.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AutoOr {
    Value(f64),
    Auto(AutoTag),
}

/// The literal string `"auto"`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl AutoOr {
    pub fn value(&self) -> Option<f64> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Auto(_) => None,
        }
    }
}

impl Default for AutoOr {
    fn default() -> Self {
        AutoOr::Auto(AutoTag::Auto)
    }
}

/// A finite number or the string `"inf"`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum UpperBound {
    Number(f64),
    Inf(InfTag),
}

/// The literal string `"inf"`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum InfTag {
    Inf,
}

impl UpperBound {
    pub fn as_f64(&self) -> f64 {
        match self {
            UpperBound::Number(v) => *v,
            UpperBound::Inf(_) => f64::INFINITY,
        }
    }
}

/// JSON model configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyConfig {
    pub m: u32,
    pub y_bar: f64,
    pub s2: f64,
    #[serde(rename = "A")]
    pub a: [f64; 2],
    #[serde(rename = "B")]
    pub b: (f64, UpperBound),
    #[serde(default)]
    pub theta_tilde: AutoOr,
    #[serde(default)]
    pub c: AutoOr,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            m: 10,
            y_bar: 10.2,
            s2: 6.5,
            a: [0.0, 100.0],
            b: (0.01, UpperBound::Inf(InfTag::Inf)),
            theta_tilde: AutoOr::default(),
            c: AutoOr::default(),
        }
    }
}

impl ToyConfig {
    pub fn model(&self) -> Result<ToyModel> {
        ToyModel::new(self.m, self.y_bar, self.s2, (self.a[0], self.a[1]), (self.b.0, self.b.1.as_f64()))
    }
}

/// Initial state used throughout: `(mu, theta) = (10, 1)`.
pub const INITIAL_STATE: [f64; 2] = [10.0, 1.0];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{self, mh_accept_log, ChainState};
    use approx::assert_relative_eq;

    #[test]
    fn log_target_values() {
        let m = ToyModel::default_cwis();
        assert_eq!(m.log_target(-1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(m.log_target(10.0, 0.005), f64::NEG_INFINITY);
        // mu = y_bar kills the quadratic term
        assert_relative_eq!(
            m.log_target(10.2, 2.0),
            -0.5 * 11.0 * 2.0f64.ln() - 6.5 / 4.0,
            max_relative = 1e-15
        );
        // frozen by direct substitution
        assert_relative_eq!(m.log_target(10.2, 1.0), -3.25, max_relative = 1e-15);
    }

    #[test]
    fn mhis_accept_examples() {
        let m = ToyModel::default_cwis();
        assert_eq!(m.mhis_accept(10.2, 1.0, 10.2, 0.5), 1.0);
        assert_eq!(m.mhis_accept(9.0, 6.5, 11.0, 6.5), 1.0);
        // frozen by independent evaluation of the displayed formula
        assert_relative_eq!(
            m.mhis_accept(10.2, 1.0, 11.0, 0.8),
            0.029965986984836192,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cwis_accept_examples() {
        let m = ToyModel::default_cwis();
        assert_eq!(m.cwis_accept_mu(9.0, 12.0, 6.5), 1.0);
        assert_eq!(m.cwis_accept_theta(1.0, 2.0, 10.2), 1.0);
        assert_eq!(m.cwis_accept_theta(1.0, 2.0, 11.0), 1.0);
        // frozen by independent evaluation
        assert_relative_eq!(
            m.cwis_accept_theta(1.0, 0.5, 11.0),
            0.04076220397836599,
            max_relative = 1e-12
        );
    }

    #[test]
    fn reduced_accepts_agree_with_generic_machinery() {
        let model = ToyModel::default_cwis();
        let mu_prop = MuProposal { model };
        let th_prop = ThetaProposal { model };
        let block = ToyBlockProposal { model };
        let mut rng = RandomStream::new(99, 0);
        for _ in 0..20_000 {
            let mu = 0.1 + 99.8 * rng.uniform();
            let mu_s = 0.1 + 99.8 * rng.uniform();
            let th = 0.02 + 8.0 * rng.uniform();
            let th_s = 0.02 + 8.0 * rng.uniform();

            let a_mu = mh_accept_log(
                model.log_target(mu, th),
                model.log_target(mu_s, th),
                mu_prop.log_density(&[mu, th], &[mu_s]),
                mu_prop.log_density(&[mu_s, th], &[mu]),
            )
            .unwrap();
            assert_relative_eq!(a_mu, model.cwis_accept_mu(mu, mu_s, th), max_relative = 1e-12);

            let a_th = mh_accept_log(
                model.log_target(mu, th),
                model.log_target(mu, th_s),
                th_prop.log_density(&[mu, th], &[th_s]),
                th_prop.log_density(&[mu, th_s], &[th]),
            )
            .unwrap();
            assert_relative_eq!(
                a_th,
                model.cwis_accept_theta(th, th_s, mu),
                max_relative = 1e-12
            );

            let a_block = mh_accept_log(
                model.log_target(mu, th),
                model.log_target(mu_s, th_s),
                block.log_density(&[mu, th], &[mu_s, th_s]),
                block.log_density(&[mu_s, th_s], &[mu, th]),
            )
            .unwrap();
            assert_relative_eq!(
                a_block,
                model.mhis_accept(mu, th, mu_s, th_s),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn truncated_normal_basics() {
        let mut rng = RandomStream::new(4, 0);
        // wide interval: first draw accepted, matching a raw normal draw
        let mut rng2 = rng.clone();
        let x = sample_truncated_normal(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY, &mut rng).unwrap();
        let y = rng2.normal(0.0, 1.0);
        assert_eq!(x.to_bits(), y.to_bits());
        // all inverse-gamma draws respect the lower bound
        for _ in 0..200 {
            let v = sample_truncated_inv_gamma(4.5, 3.25, 0.01, f64::INFINITY, &mut rng).unwrap();
            assert!(v > 0.01);
        }
    }

    #[test]
    fn truncated_normal_mean_matches_analytic() {
        let mut rng = RandomStream::new(12, 0);
        let (mean, sd, lo, hi) = (10.2, 0.65f64.sqrt(), 0.0, 100.0);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_truncated_normal(mean, sd, lo, hi, &mut rng).unwrap();
        }
        let emp = sum / n as f64;
        // truncated-moment formula; the truncation is ~13 sd away so the
        // correction is negligible but exact
        let a = (lo - mean) / sd;
        let b = (hi - mean) / sd;
        let phi = |z: f64| (-(z * z) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cap_phi = |z: f64| 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
        let analytic = mean + sd * (phi(a) - phi(b)) / (cap_phi(b) - cap_phi(a));
        let se = sd / (n as f64).sqrt();
        assert!((emp - analytic).abs() < 3.0 * se);
    }

    fn erf(x: f64) -> f64 {
        // Abramowitz-Stegun 7.1.26, enough for the test's 3-se tolerance
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
                + 0.254829592)
                * t
                * (-x * x).exp();
        if x < 0.0 {
            -y
        } else {
            y
        }
    }

    #[test]
    fn minorization_sandwich_holds_at_random_points() {
        let model = ToyModel::default_cwis();
        let tt = 0.5;
        let mut rng = RandomStream::new(31, 0);
        for _ in 0..100_000 {
            let mu = 0.1 + 99.8 * rng.uniform();
            let th = 0.011 + 10.0 * rng.uniform();
            let lhs = model.log_g1(mu, tt) + model.log_g2(th, tt);
            assert!(lhs <= model.log_r1(mu, th) + 1e-12);
            assert!(model.log_r2(mu, th) <= 1e-12);
        }
    }

    #[test]
    fn regen_vanishes_below_cutoff() {
        let model = ToyModel::default_cwis();
        let p = toy_cwis_regen_prob(&model, (10.0, 0.3), (10.1, 1.0), 0.5).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn reduced_regen_agrees_with_generic() {
        let model = ToyModel::default_cwis();
        let tt = 0.5;
        let spec = toy_minorization_spec(&model, tt).unwrap();
        let proposals = component_proposals(&model);
        let mut rng = RandomStream::new(77, 0);
        let mut state = ChainState::new(&model, INITIAL_STATE.to_vec()).unwrap();
        let mut checked = 0;
        while checked < 5_000 {
            let prev = state.x().to_vec();
            let outs = chain::composition_sweep(&model, &mut state, &proposals, &mut rng).unwrap();
            if outs.iter().all(|o| o.accepted) {
                let curr = state.x().to_vec();
                let generic =
                    crate::regen::cwis_regen_prob(&model, &proposals, &spec, &prev, &curr).unwrap();
                let reduced = toy_cwis_regen_prob(
                    &model,
                    (prev[0], prev[1]),
                    (curr[0], curr[1]),
                    tt,
                )
                .unwrap();
                assert_relative_eq!(generic, reduced, max_relative = 1e-12);
                assert!((0.0..=1.0).contains(&generic));
                checked += 1;
            }
        }
    }

    #[test]
    fn oracle_matches_frozen_quadrature_value() {
        let model = ToyModel::default_cwis();
        let v = oracle_posterior_mean_icv(&model).unwrap();
        // frozen from an independent quadrature implementation
        assert_relative_eq!(v, 10.96860744336214, max_relative = 1e-7);
        let v0 = oracle_posterior_mean_icv(&ToyModel::default_mhis()).unwrap();
        assert_relative_eq!(v0, 10.96860744336214, max_relative = 1e-7);
    }

    #[test]
    fn oracle_odd_symmetry() {
        // symmetric A around y_bar and integrand mu - y_bar integrates to 0
        let model = ToyModel::new(10, 10.2, 6.5, (5.2, 15.2), (0.01, f64::INFINITY)).unwrap();
        let v = posterior_expectation(&model, |mu, _| mu - 10.2, 1e-8).unwrap();
        assert!(v.abs() < 1e-8, "odd integrand gave {v}");
    }

    #[test]
    fn mhis_premise_spot_check() {
        let model = ToyModel::default_mhis();
        let delta = mhis_uniform_ergodicity_delta(&model).unwrap();
        assert!(delta > 0.0);
        // p_norm >= delta * pi_norm pointwise; verify in the display scale:
        // p_u / pi_u >= delta * (Z_p / Z_pi) reduces to log_w <= threshold.
        let mut rng = RandomStream::new(63, 0);
        let m = model.m as f64;
        let bound = (m / (2.0 * model.s2)) * (model.mu_tilde() - model.y_bar).powi(2);
        for _ in 0..100_000 {
            let mu = 0.1 + 99.8 * rng.uniform();
            let th = 0.01 + 30.0 * rng.uniform();
            // -log_w = log(p_u/pi_u) >= -bound
            assert!(-model.log_w(mu, th) >= -bound - 1e-9);
        }
    }

    #[test]
    fn four_point_ratio_meets_epsilon() {
        let model = ToyModel::default_cwis();
        let eps = model.four_point_epsilon().unwrap();
        let mut rng = RandomStream::new(64, 0);
        for _ in 0..100_000 {
            let mu = 0.1 + 99.8 * rng.uniform();
            let mu_p = 0.1 + 99.8 * rng.uniform();
            let th = 0.011 + 20.0 * rng.uniform();
            let th_p = 0.011 + 20.0 * rng.uniform();
            let ratio = model.log_target(mu, th) + model.log_target(mu_p, th_p)
                - model.log_target(mu, th_p)
                - model.log_target(mu_p, th);
            assert!(ratio.exp() >= eps - 1e-300);
        }
    }

    #[test]
    fn config_roundtrip() {
        let json = r#"{
            "m": 10, "y_bar": 10.2, "s2": 6.5,
            "A": [0.0, 100.0], "B": [0.01, "inf"],
            "theta_tilde": "auto", "c": 0.9
        }"#;
        let cfg: ToyConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.theta_tilde, AutoOr::Auto(AutoTag::Auto));
        assert_eq!(cfg.c.value(), Some(0.9));
        let model = cfg.model().unwrap();
        assert_eq!(model.b.1, f64::INFINITY);
        let back = serde_json::to_string(&cfg).unwrap();
        let cfg2: ToyConfig = serde_json::from_str(&back).unwrap();
        assert_eq!(cfg2.b.0, cfg.b.0);
    }

    #[test]
    fn theta_tilde_outside_b_is_config_error() {
        let model = ToyModel::default_cwis();
        assert!(matches!(
            toy_minorization_spec(&model, 0.001),
            Err(Error::Config(_))
        ));
    }
}
