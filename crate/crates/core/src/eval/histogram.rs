use serde::{Deserialize, Serialize};

use super::EvalError;

/// Uniform-bin histogram normalized so that `sum(density * width) == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub metric: String,
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub total: usize,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    /// `sum(density * width)`, which is 1 up to rounding.
    pub fn mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

/// Bins `values` into `bins` equal bins over `range`; values outside the
/// range are counted in the nearest edge bin.
pub fn build_histogram(
    metric: &str,
    values: &[f64],
    bins: usize,
    range: (f64, f64),
) -> Result<Histogram, EvalError> {
    let (lo, hi) = range;
    if bins == 0 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(EvalError::InvalidBins {
            metric: metric.to_string(),
            bins,
            lo,
            hi,
        });
    }
    if values.is_empty() {
        return Err(EvalError::EmptyHistogram(metric.to_string()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite {
            metric: metric.to_string(),
            value: *v,
        });
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = ((v - lo) / width).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
        counts[k] += 1;
    }
    let total = values.len();
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (total as f64 * (e[1] - e[0])))
        .collect();
    Ok(Histogram {
        metric: metric.to_string(),
        edges,
        densities,
        total,
    })
}

/// Sum over bins of the absolute density difference.
pub fn l1_distance(a: &Histogram, b: &Histogram) -> Result<f64, EvalError> {
    if a.edges != b.edges {
        return Err(EvalError::EdgeMismatch {
            left: a.metric.clone(),
            right: b.metric.clone(),
        });
    }
    Ok(a
        .densities
        .iter()
        .zip(&b.densities)
        .map(|(x, y)| (x - y).abs())
        .sum())
}
