use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{log_softmax, Activation, DenseNet, NumericsError};
use crate::seeds;
use crate::sim::{ActionId, NUM_ACTIONS, STATE_DIM};

/// Input width of `f`: the state followed by a one-hot action.
pub const DISC_INPUT_DIM: usize = STATE_DIM + NUM_ACTIONS;

/// Scale applied to the policy's output-layer initialization so a fresh
/// policy is close to uniform.
const POLICY_OUTPUT_SCALE: f64 = 0.01;

/// The logit network `f(s, a)` of the discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub net: DenseNet,
}

impl Discriminator {
    pub fn random<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Result<Self, NumericsError> {
        let sizes = layer_sizes(DISC_INPUT_DIM, hidden, 1);
        Ok(Self {
            net: DenseNet::random(&sizes, Activation::Tanh, 1.0, rng)?,
        })
    }

    pub fn input(state: &[f64], action: ActionId) -> [f64; DISC_INPUT_DIM] {
        let mut x = [0.0; DISC_INPUT_DIM];
        x[..STATE_DIM].copy_from_slice(state);
        x[STATE_DIM + action.index()] = 1.0;
        x
    }

    pub fn logit(&self, state: &[f64], action: ActionId) -> Result<f64, NumericsError> {
        Ok(self.net.forward(&Self::input(state, action))?[0])
    }
}

/// Categorical policy over the six joint actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub net: DenseNet,
}

impl Policy {
    pub fn random<R: Rng + ?Sized>(hidden: &[usize], rng: &mut R) -> Result<Self, NumericsError> {
        let sizes = layer_sizes(STATE_DIM, hidden, NUM_ACTIONS);
        Ok(Self {
            net: DenseNet::random(&sizes, Activation::Tanh, POLICY_OUTPUT_SCALE, rng)?,
        })
    }

    pub fn log_probs(&self, state: &[f64]) -> Result<[f64; NUM_ACTIONS], NumericsError> {
        let lp = log_softmax(&self.net.forward(state)?);
        let mut out = [0.0; NUM_ACTIONS];
        out.copy_from_slice(&lp);
        Ok(out)
    }

    pub fn probs(&self, state: &[f64]) -> Result<[f64; NUM_ACTIONS], NumericsError> {
        Ok(self.log_probs(state)?.map(f64::exp))
    }

    pub fn log_prob(&self, state: &[f64], action: ActionId) -> Result<f64, NumericsError> {
        Ok(self.log_probs(state)?[action.index()])
    }

    /// Draws an action by inverse-CDF sampling; returns it with its log-probability.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        rng: &mut R,
    ) -> Result<(ActionId, f64), NumericsError> {
        let lp = self.log_probs(state)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = NUM_ACTIONS - 1;
        for (i, l) in lp.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                chosen = i;
                break;
            }
        }
        Ok((ActionId::new(chosen).expect("index below NUM_ACTIONS"), lp[chosen]))
    }

    /// Most probable action (lowest index on ties) with its log-probability.
    pub fn greedy(&self, state: &[f64]) -> Result<(ActionId, f64), NumericsError> {
        let lp = self.log_probs(state)?;
        let mut best = 0;
        for i in 1..NUM_ACTIONS {
            if lp[i] > lp[best] {
                best = i;
            }
        }
        Ok((ActionId::new(best).expect("index below NUM_ACTIONS"), lp[best]))
    }
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

/// Joint parameters of one AIRL model: the discriminator's `f` and the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub discriminator: Discriminator,
    pub policy: Policy,
}

impl ModelParams {
    /// Both networks with the same hidden widths.
    pub fn init(hidden: &[usize], seed: u64) -> Result<Self, NumericsError> {
        Self::init_with(hidden, hidden, seed)
    }

    pub fn init_with(
        disc_hidden: &[usize],
        policy_hidden: &[usize],
        seed: u64,
    ) -> Result<Self, NumericsError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, seeds::stream_id("init"), 0));
        let discriminator = Discriminator::random(disc_hidden, &mut rng)?;
        let policy = Policy::random(policy_hidden, &mut rng)?;
        Ok(Self {
            discriminator,
            policy,
        })
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.discriminator.net.same_shape(&other.discriminator.net)
            && self.policy.net.same_shape(&other.policy.net)
    }

    pub fn is_finite(&self) -> bool {
        self.discriminator.net.params().iter().all(|v| v.is_finite())
            && self.policy.net.params().iter().all(|v| v.is_finite())
    }
}
