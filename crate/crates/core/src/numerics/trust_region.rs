//! KL-constrained natural-gradient step for categorical policies.
//!
//! The search direction solves `F x = g` by conjugate gradients, where `g`
//! is the gradient of the importance-weighted surrogate and `F` the Fisher
//! matrix of the policy's action distribution (applied matrix-free through
//! a Jacobian-vector product followed by a backward pass). The step is
//! scaled to the trust-region radius and shrunk geometrically until both the
//! KL bound and a positive surrogate improvement hold.

use serde::{Deserialize, Serialize};

use super::net::{check_finite, check_len, dot, DenseNet, ForwardTrace};
use super::{log_softmax, NumericsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionConfig {
    /// Bound on the batch-mean KL(old || new) of an accepted step.
    pub max_kl: f64,
    pub cg_iterations: usize,
    pub cg_tolerance: f64,
    /// Added to the Fisher-vector product (`F + damping * I`).
    pub damping: f64,
    pub backtrack_shrink: f64,
    pub max_backtracks: usize,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            max_kl: 0.01,
            cg_iterations: 10,
            cg_tolerance: 1e-10,
            damping: 0.1,
            backtrack_shrink: 0.5,
            max_backtracks: 10,
        }
    }
}

impl TrustRegionConfig {
    pub fn validate(&self) -> Result<(), NumericsError> {
        let ok = self.max_kl > 0.0
            && self.max_kl.is_finite()
            && self.cg_iterations >= 1
            && self.cg_tolerance >= 0.0
            && self.damping >= 0.0
            && self.backtrack_shrink > 0.0
            && self.backtrack_shrink < 1.0
            && self.max_backtracks >= 1;
        if ok {
            Ok(())
        } else {
            Err(NumericsError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// One on-policy batch: per-sample state, chosen action, the probability the
/// behavior policy assigned to that action, and its advantage estimate.
#[derive(Debug, Clone, Default)]
pub struct PolicyBatch<'a> {
    pub states: Vec<&'a [f64]>,
    pub actions: Vec<usize>,
    pub behavior_probs: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl PolicyBatch<'_> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn validate(&self, policy: &DenseNet) -> Result<(), NumericsError> {
        let n = self.states.len();
        check_len("batch actions", n, self.actions.len())?;
        check_len("batch behavior probabilities", n, self.behavior_probs.len())?;
        check_len("batch advantages", n, self.advantages.len())?;
        check_finite("advantages", &self.advantages)?;
        if let Some(index) = self
            .behavior_probs
            .iter()
            .position(|&p| !(p > 0.0 && p <= 1.0))
        {
            return Err(NumericsError::NonFinite {
                what: "behavior probability",
                index,
            });
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= policy.output_dim()) {
            return Err(NumericsError::DimensionMismatch {
                what: "action index",
                expected: policy.output_dim(),
                got: a,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Accepted,
    /// Surrogate gradient was exactly zero.
    NoGradient,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionReport {
    pub status: StepStatus,
    /// Batch-mean KL(old || new) of the accepted step (0 otherwise).
    pub kl: f64,
    pub surrogate_gain: f64,
    pub backtracks: usize,
}

impl TrustRegionReport {
    pub fn accepted(&self) -> bool {
        self.status == StepStatus::Accepted
    }

    fn unchanged(status: StepStatus, backtracks: usize) -> Self {
        Self {
            status,
            kl: 0.0,
            surrogate_gain: 0.0,
            backtracks,
        }
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` given only `x -> A x`.
pub fn conjugate_gradient<F>(
    mut apply: F,
    b: &[f64],
    max_iterations: usize,
    tolerance: f64,
) -> Result<Vec<f64>, NumericsError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, NumericsError>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iterations {
        if rr <= tolerance {
            break;
        }
        let ap = apply(&p)?;
        check_len("matrix-vector product", b.len(), ap.len())?;
        check_finite("matrix-vector product", &ap)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(NumericsError::NotPositiveDefinite(pap));
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    Ok(x)
}

struct Linearization {
    traces: Vec<ForwardTrace>,
    probs: Vec<Vec<f64>>,
    log_probs: Vec<Vec<f64>>,
}

impl Linearization {
    fn new(policy: &DenseNet, states: &[&[f64]]) -> Result<Self, NumericsError> {
        let mut traces = Vec::with_capacity(states.len());
        let mut probs = Vec::with_capacity(states.len());
        let mut log_probs = Vec::with_capacity(states.len());
        for s in states {
            let trace = policy.forward_trace(s)?;
            let lp = log_softmax(trace.output());
            probs.push(lp.iter().map(|v| v.exp()).collect());
            log_probs.push(lp);
            traces.push(trace);
        }
        Ok(Self {
            traces,
            probs,
            log_probs,
        })
    }

    /// `(F + damping I) v`, batch-averaged.
    fn fisher_vector_product(
        &self,
        policy: &DenseNet,
        v: &[f64],
        damping: f64,
    ) -> Result<Vec<f64>, NumericsError> {
        let n = self.traces.len() as f64;
        let mut out = vec![0.0; v.len()];
        for (trace, p) in self.traces.iter().zip(&self.probs) {
            let jv = policy.jvp(trace, v)?;
            let mean = dot(p, &jv);
            let u: Vec<f64> = p
                .iter()
                .zip(&jv)
                .map(|(pi, ji)| pi * (ji - mean) / n)
                .collect();
            policy.accumulate_backward(trace, &u, &mut out)?;
        }
        for (o, vi) in out.iter_mut().zip(v) {
            *o += damping * vi;
        }
        check_finite("fisher-vector product", &out)?;
        Ok(out)
    }
}

/// Surrogate value and batch-mean KL(old || candidate).
fn evaluate_candidate(
    candidate: &DenseNet,
    batch: &PolicyBatch<'_>,
    old: &Linearization,
) -> Result<(f64, f64), NumericsError> {
    let n = batch.len() as f64;
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for (i, s) in batch.states.iter().enumerate() {
        let lp = log_softmax(&candidate.forward(s)?);
        let a = batch.actions[i];
        surrogate += (lp[a] - batch.behavior_probs[i].ln()).exp() * batch.advantages[i];
        kl += old.probs[i]
            .iter()
            .zip(&old.log_probs[i])
            .zip(&lp)
            .map(|((p, lo), ln)| if *p > 0.0 { p * (lo - ln) } else { 0.0 })
            .sum::<f64>();
    }
    Ok((surrogate / n, kl / n))
}

/// Batch-mean KL(old || new) between two categorical policies.
pub fn mean_kl(old: &DenseNet, new: &DenseNet, states: &[&[f64]]) -> Result<f64, NumericsError> {
    if states.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in states {
        let lo = log_softmax(&old.forward(s)?);
        let ln = log_softmax(&new.forward(s)?);
        total += lo
            .iter()
            .zip(&ln)
            .map(|(a, b)| a.exp() * (a - b))
            .sum::<f64>();
    }
    Ok(total / states.len() as f64)
}

/// Performs one trust-region step on `policy` in place.
///
/// On any error or a failed line search the parameters are left unchanged.
pub fn trust_region_step(
    policy: &mut DenseNet,
    batch: &PolicyBatch<'_>,
    config: &TrustRegionConfig,
) -> Result<TrustRegionReport, NumericsError> {
    config.validate()?;
    batch.validate(policy)?;
    if batch.is_empty() {
        return Ok(TrustRegionReport::unchanged(StepStatus::NoGradient, 0));
    }
    let n = batch.len() as f64;
    let old = Linearization::new(policy, &batch.states)?;

    let mut grad = vec![0.0; policy.num_params()];
    let mut surrogate_old = 0.0;
    for (i, trace) in old.traces.iter().enumerate() {
        let a = batch.actions[i];
        let ratio = (old.log_probs[i][a] - batch.behavior_probs[i].ln()).exp();
        let weight = ratio * batch.advantages[i];
        surrogate_old += weight;
        if weight == 0.0 {
            continue;
        }
        let out_grad: Vec<f64> = old.probs[i]
            .iter()
            .enumerate()
            .map(|(k, p)| weight * (f64::from(u8::from(k == a)) - p) / n)
            .collect();
        policy.accumulate_backward(trace, &out_grad, &mut grad)?;
    }
    surrogate_old /= n;
    check_finite("surrogate gradient", &grad)?;
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(TrustRegionReport::unchanged(StepStatus::NoGradient, 0));
    }

    let fvp = |v: &[f64]| old.fisher_vector_product(policy, v, config.damping);
    let direction = conjugate_gradient(fvp, &grad, config.cg_iterations, config.cg_tolerance)?;
    let curvature = dot(&direction, &fvp(&direction)?);
    if !(curvature.is_finite() && curvature > 0.0) {
        return Err(NumericsError::NotPositiveDefinite(curvature));
    }
    let scale = (2.0 * config.max_kl / curvature).sqrt();

    let start = policy.params().to_vec();
    let mut candidate = policy.clone();
    let mut fraction = 1.0;
    for backtracks in 0..=config.max_backtracks {
        let params: Vec<f64> = start
            .iter()
            .zip(&direction)
            .map(|(p, d)| p + fraction * scale * d)
            .collect();
        if candidate.set_params(&params).is_ok() {
            let (surrogate, kl) = evaluate_candidate(&candidate, batch, &old)?;
            let gain = surrogate - surrogate_old;
            if kl.is_finite() && kl <= config.max_kl && gain > 0.0 {
                *policy = candidate;
                return Ok(TrustRegionReport {
                    status: StepStatus::Accepted,
                    kl,
                    surrogate_gain: gain,
                    backtracks,
                });
            }
        }
        fraction *= config.backtrack_shrink;
    }
    Ok(TrustRegionReport::unchanged(
        StepStatus::LineSearchFailed,
        config.max_backtracks,
    ))
}
