//! Discriminator probability, cross-entropy loss, and the derived reward.
//!
//! With `x = f(s, a) - log pi(a|s)` the discriminator is `D = sigmoid(x)`,
//! so every quantity is evaluated through `log sigmoid` and never through
//! `exp(f)` directly.

use crate::numerics::NumericsError;
use crate::sim::ActionId;

use super::model::{Discriminator, Policy};

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `exp(f) / (exp(f) + pi)` given `f` and `log pi`.
pub fn disc_prob_from_logit(f: f64, log_pi: f64) -> f64 {
    sigmoid(f - log_pi)
}

/// `log D - log(1 - D)` given `f` and `log pi`.
pub fn reward_from_logit(f: f64, log_pi: f64) -> f64 {
    let x = f - log_pi;
    log_sigmoid(x) - log_sigmoid(-x)
}

pub fn disc_prob(
    disc: &Discriminator,
    policy: &Policy,
    state: &[f64],
    action: ActionId,
) -> Result<f64, NumericsError> {
    Ok(disc_prob_from_logit(
        disc.logit(state, action)?,
        policy.log_prob(state, action)?,
    ))
}

pub fn reward(
    disc: &Discriminator,
    policy: &Policy,
    state: &[f64],
    action: ActionId,
) -> Result<f64, NumericsError> {
    Ok(reward_from_logit(
        disc.logit(state, action)?,
        policy.log_prob(state, action)?,
    ))
}

/// One state-action pair with the policy log-probability the discriminator
/// should use for it.
#[derive(Debug, Clone, Copy)]
pub struct DiscPair<'a> {
    pub state: &'a [f64],
    pub action: ActionId,
    pub log_pi: f64,
}

/// Mean of `-log D` over expert pairs plus mean of `-log(1 - D)` over
/// generated pairs.
pub fn disc_loss(
    disc: &Discriminator,
    expert: &[DiscPair<'_>],
    generated: &[DiscPair<'_>],
) -> Result<f64, NumericsError> {
    Ok(disc_loss_terms(disc, expert, generated, false)?.0)
}

/// Loss and its gradient with respect to the parameters of `f`.
pub fn disc_loss_and_grad(
    disc: &Discriminator,
    expert: &[DiscPair<'_>],
    generated: &[DiscPair<'_>],
) -> Result<(f64, Vec<f64>), NumericsError> {
    disc_loss_terms(disc, expert, generated, true)
}

fn disc_loss_terms(
    disc: &Discriminator,
    expert: &[DiscPair<'_>],
    generated: &[DiscPair<'_>],
    with_grad: bool,
) -> Result<(f64, Vec<f64>), NumericsError> {
    if expert.is_empty() || generated.is_empty() {
        return Err(NumericsError::DimensionMismatch {
            what: "discriminator batch",
            expected: 1,
            got: 0,
        });
    }
    let net = &disc.net;
    let mut grad = if with_grad {
        vec![0.0; net.num_params()]
    } else {
        Vec::new()
    };
    let mut loss = 0.0;
    for (pairs, label) in [(expert, true), (generated, false)] {
        let n = pairs.len() as f64;
        for p in pairs {
            let input = Discriminator::input(p.state, p.action);
            let trace = net.forward_trace(&input)?;
            let x = trace.output()[0] - p.log_pi;
            // d/dx of -log sigmoid(x) is sigmoid(x) - 1; of -log(1 - sigmoid(x)) it is sigmoid(x).
            let (term, dx) = if label {
                (-log_sigmoid(x), sigmoid(x) - 1.0)
            } else {
                (-log_sigmoid(-x), sigmoid(x))
            };
            loss += term / n;
            if with_grad {
                net.accumulate_backward(&trace, &[dx / n], &mut grad)?;
            }
        }
    }
    Ok((loss, grad))
}
