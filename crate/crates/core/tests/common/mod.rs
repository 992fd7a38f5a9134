#![allow(dead_code)]

use metairl::meta::{meta_step, InnerLoop, MetaError, MetaState, OuterConfig, ParamGroups};
use metairl::numerics::DenseNet;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

/// Largest relative error between `backward` and central differences of
/// `<output_grad, net(input)>` over every parameter.
pub fn backward_fd_error(net: &DenseNet, input: &[f64], output_grad: &[f64]) -> f64 {
    let grad = net.backward(input, output_grad).unwrap();
    let theta = net.params().to_vec();
    let mut probe = net.clone();
    let objective = |n: &DenseNet| -> f64 {
        n.forward(input)
            .unwrap()
            .iter()
            .zip(output_grad)
            .map(|(y, g)| y * g)
            .sum()
    };
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let mut p = theta.clone();
        p[k] += FD_STEP;
        probe.set_params(&p).unwrap();
        let up = objective(&probe);
        p[k] -= 2.0 * FD_STEP;
        probe.set_params(&p).unwrap();
        let down = objective(&probe);
        let fd = (up - down) / (2.0 * FD_STEP);
        let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Random symmetric positive-definite `n x n` matrix (row-major) and right-hand side.
pub fn spd_system<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    let m: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>();
        }
        a[i * n + i] += 0.5;
    }
    let b = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (a, b)
}

pub fn mat_vec(a: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pair(pub Vec<f64>, pub Vec<f64>);

impl ParamGroups for Pair {
    fn groups(&self) -> Vec<&[f64]> {
        vec![&self.0, &self.1]
    }

    fn with_groups(&self, groups: Vec<Vec<f64>>) -> Result<Self, MetaError> {
        let [a, b]: [Vec<f64>; 2] = groups
            .try_into()
            .map_err(|_| MetaError::ShapeMismatch("groups".into()))?;
        if a.len() != self.0.len() || b.len() != self.1.len() {
            return Err(MetaError::ShapeMismatch("lengths".into()));
        }
        Ok(Pair(a, b))
    }
}

pub fn pair(a: &[f64], b: &[f64]) -> Pair {
    Pair(a.to_vec(), b.to_vec())
}

/// Gradient descent on `0.5 * sum_k w_k (x_k - c_k)^2`, with per-task curvatures.
pub struct Quadratics {
    pub minimizer: Vec<f64>,
    pub curvatures: Vec<Vec<f64>>,
    pub steps: usize,
    pub rate: f64,
}

impl InnerLoop for Quadratics {
    type Params = Pair;
    type Report = ();

    fn num_tasks(&self) -> usize {
        self.curvatures.len()
    }

    fn task_name(&self, task: usize) -> String {
        format!("quadratic-{task}")
    }

    fn train(&self, task: usize, params: &Pair, _seed: u64) -> Result<(Pair, ()), MetaError> {
        let w = &self.curvatures[task];
        let (d, p) = self.minimizer.split_at(2);
        let descend = |x: &[f64], c: &[f64], w: &[f64]| -> Vec<f64> {
            let mut x = x.to_vec();
            for _ in 0..self.steps {
                for k in 0..x.len() {
                    x[k] -= self.rate * w[k] * (x[k] - c[k]);
                }
            }
            x
        };
        Ok((Pair(descend(&params.0, d, &w[..2]), descend(&params.1, p, &w[2..])), ()))
    }
}

/// Meta iterations REPTILE needs on three quadratics with a shared minimizer
/// until every coordinate is within 1e-3 of it.
pub fn quadratic_toy_convergence(max_iterations: usize) -> Option<usize> {
    let toy = Quadratics {
        minimizer: vec![1.5, -2.0, 0.75],
        curvatures: vec![vec![1.0, 0.2, 2.0], vec![0.3, 1.5, 0.5], vec![2.0, 0.6, 1.0]],
        steps: 5,
        rate: 0.1,
    };
    let mut state = MetaState::new(pair(&[10.0, 10.0], &[-10.0]), 4);
    let config = OuterConfig {
        tasks_per_iteration: 2,
        betas: vec![0.5, 0.25],
        seed: 4,
    };
    for it in 0..max_iterations {
        meta_step(&toy, &mut state, &config).unwrap();
        let err = state
            .params
            .0
            .iter()
            .chain(&state.params.1)
            .zip(&toy.minimizer)
            .map(|(x, c)| (x - c).abs())
            .fold(0.0, f64::max);
        if err < 1e-3 {
            assert_eq!(state.iteration, it + 1);
            return Some(it + 1);
        }
    }
    None
}
