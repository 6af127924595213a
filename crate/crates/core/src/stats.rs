//! Sample statistics: means, batch means and least squares lines.

/// Sample mean and standard error of the mean.
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Minimum number of batches used by batch-means estimators.
pub const MIN_BATCHES: usize = 20;

/// Batch-means estimate of the mean of a stationary series: the series is cut
/// into `batches` contiguous blocks and the standard error is that of the
/// block means.
pub fn batch_means(series: &[f64], batches: usize) -> (f64, f64) {
    let b = batches.max(2).min(series.len().max(1));
    let len = series.len() / b;
    if len == 0 {
        return mean_stderr(series);
    }
    let means: Vec<f64> = (0..b)
        .map(|i| series[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    mean_stderr(&means)
}

/// Streaming accumulator of vector-valued block means.
#[derive(Clone, Debug)]
pub struct BatchAccumulator {
    dim: usize,
    sums: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl BatchAccumulator {
    pub fn new(dim: usize) -> Self {
        BatchAccumulator {
            dim,
            sums: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Adds one finished block with total weight `w` and weighted sums `s`.
    pub fn push_block(&mut self, s: Vec<f64>, w: f64) {
        debug_assert_eq!(s.len(), self.dim);
        if w > 0.0 {
            self.sums.push(s);
            self.weights.push(w);
        }
    }

    pub fn merge(&mut self, other: BatchAccumulator) {
        self.sums.extend(other.sums);
        self.weights.extend(other.weights);
    }

    pub fn blocks(&self) -> usize {
        self.weights.len()
    }

    /// Weighted mean and batch-means standard error per component.
    pub fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let total: f64 = self.weights.iter().sum();
        let nb = self.weights.len() as f64;
        let mut mean = vec![0.0; self.dim];
        for s in &self.sums {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / total;
            }
        }
        let mut se = vec![0.0; self.dim];
        if self.weights.len() >= 2 {
            let wbar = total / nb;
            for (s, &w) in self.sums.iter().zip(&self.weights) {
                for k in 0..self.dim {
                    // ratio-estimator residual of the block
                    let r = (s[k] - mean[k] * w) / wbar;
                    se[k] += r * r;
                }
            }
            for v in se.iter_mut() {
                *v = (*v / (nb * (nb - 1.0))).sqrt();
            }
        }
        (mean, se)
    }
}

/// Least squares line `y = a + b t`; returns `(a, b, stderr of b)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let slope = sty / stt;
    let icpt = ym - slope * tm;
    let rss: f64 = t.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let se = if t.len() > 2 {
        (rss / (n - 2.0) / stt).sqrt()
    } else {
        f64::INFINITY
    };
    (icpt, slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr_of_small_sample() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn batch_means_of_constant_series() {
        let (m, s) = batch_means(&[2.0; 100], 20);
        assert_eq!((m, s), (2.0, 0.0));
    }

    #[test]
    fn accumulator_matches_plain_mean_for_equal_blocks() {
        let mut acc = BatchAccumulator::new(1);
        let data = [1.0, 3.0, 2.0, 6.0];
        for &x in &data {
            acc.push_block(vec![x * 10.0], 10.0);
        }
        let (m, s) = acc.finish();
        let (m2, s2) = mean_stderr(&data);
        assert!((m[0] - m2).abs() < 1e-14 && (s[0] - s2).abs() < 1e-14);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| 1.0 - 2.0 * v).collect();
        let (a, b, se) = linear_fit(&t, &y);
        assert!((a - 1.0).abs() < 1e-12 && (b + 2.0).abs() < 1e-12 && se < 1e-10);
    }
}
