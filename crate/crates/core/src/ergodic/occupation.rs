//! Occupation histograms of the torus process.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Expr, ProblemSpec};
use crate::grid::Grid;
use crate::rng::path_rng;
use crate::sde::{par_map, LiftedState, SimConfig, Stepper};
use crate::stats::{mean_stderr, MIN_BATCHES};

/// Mergeable `n^d` histogram of visited cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupationGrid {
    pub grid: Grid,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl OccupationGrid {
    pub fn new(grid: Grid) -> Self {
        OccupationGrid {
            grid,
            counts: vec![0; grid.len()],
            total: 0,
        }
    }

    pub fn from_counts(grid: Grid, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.len() {
            return Err(Error::invalid("counts do not match the grid"));
        }
        let total = counts.iter().sum();
        Ok(OccupationGrid { grid, counts, total })
    }

    #[inline]
    pub fn record(&mut self, y: &[f64]) {
        self.counts[self.grid.cell_of(y)] += 1;
        self.total += 1;
    }

    /// Sum of two histograms over the same grid.
    pub fn merge(&self, other: &OccupationGrid) -> Result<OccupationGrid> {
        if self.grid != other.grid {
            return Err(Error::invalid("cannot merge histograms on different grids"));
        }
        Ok(OccupationGrid {
            grid: self.grid,
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
            total: self.total + other.total,
        })
    }

    /// Cell probabilities `counts / total`.
    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// Density relative to the uniform measure (`1` everywhere for Lebesgue).
    pub fn relative_density(&self) -> Vec<f64> {
        let n = self.grid.len() as f64;
        self.probabilities().into_iter().map(|p| p * n).collect()
    }

    /// `Σ_cells f(center) p_cell`.
    pub fn expectation(&self, f: &Expr, masks: &[crate::fields::BumpMask]) -> f64 {
        let probs = self.probabilities();
        probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| p * f.value(&self.grid.center(i), masks))
            .sum()
    }

    /// Bounded-Lipschitz distance between two histograms on the same grid,
    /// computed in its dual form through the 1-Wasserstein distance of the
    /// per-axis marginals (exact for `d = 1`, a lower bound otherwise).
    pub fn marginal_distance(&self, other: &OccupationGrid) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::invalid("histograms live on different grids"));
        }
        let (n, d) = (self.grid.n, self.grid.d);
        let (p, q) = (self.probabilities(), other.probabilities());
        let mut worst = 0.0f64;
        for axis in 0..d {
            let mut mp = vec![0.0; n];
            let mut mq = vec![0.0; n];
            for i in 0..self.grid.len() {
                let c = self.grid.multi_index(i)[axis];
                mp[c] += p[i];
                mq[c] += q[i];
            }
            // circle W1: min over shifts of the L1 norm of the CDF difference
            let mut cdf = vec![0.0; n];
            let mut acc = 0.0;
            for c in 0..n {
                acc += mp[c] - mq[c];
                cdf[c] = acc;
            }
            let mut sorted = cdf.clone();
            sorted.sort_by(f64::total_cmp);
            let med = sorted[n / 2];
            let w1: f64 = cdf.iter().map(|v| (v - med).abs()).sum::<f64>() / n as f64;
            worst = worst.max(w1);
        }
        Ok(worst)
    }
}

/// Pooled histogram plus independent batch histograms for error bars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationEnsemble {
    pub pooled: OccupationGrid,
    pub batches: Vec<OccupationGrid>,
    pub burn_in: f64,
    pub seed: u64,
    pub eps: f64,
}

impl OccupationEnsemble {
    /// Mean and standard error of `Σ f(center) p_cell` across batches, for
    /// each of the given fields.
    pub fn expectation_with_stderr(&self, fields: &[Expr], masks: &[crate::fields::BumpMask]) -> (Vec<f64>, Vec<f64>) {
        let grid = self.pooled.grid;
        let values: Vec<Vec<f64>> = fields
            .iter()
            .map(|f| (0..grid.len()).map(|i| f.value(&grid.center(i), masks)).collect())
            .collect();
        let eval = |g: &OccupationGrid, k: usize| -> f64 {
            let t = g.total.max(1) as f64;
            g.counts
                .iter()
                .zip(&values[k])
                .map(|(&c, &v)| c as f64 / t * v)
                .sum()
        };
        let mut mean = Vec::new();
        let mut se = Vec::new();
        for k in 0..fields.len() {
            mean.push(eval(&self.pooled, k));
            let per: Vec<f64> = self.batches.iter().filter(|b| b.total > 0).map(|b| eval(b, k)).collect();
            se.push(mean_stderr(&per).1);
        }
        (mean, se)
    }
}

/// Occupation histogram of the torus process after `burn_in`, pooled over
/// `cfg.n_paths` paths started at uniform points. Paths are dealt into
/// [`MIN_BATCHES`] batches (or their post-burn-in windows cut into time
/// blocks when there are fewer paths than batches).
pub fn estimate_invariant_batched(
    spec: &ProblemSpec,
    cfg: &SimConfig,
    n: usize,
    burn_in: f64,
) -> Result<OccupationEnsemble> {
    cfg.check(spec)?;
    if !(burn_in >= 0.0 && burn_in < cfg.t) {
        return Err(Error::invalid("burn-in must lie in [0, T)"));
    }
    let grid = Grid::new(n, spec.d());
    let paths = cfg.n_paths.max(1);
    let blocks_per_path = MIN_BATCHES.div_ceil(paths);
    let steps = cfg.steps();
    let burn_steps = (burn_in / cfg.h).round() as usize;
    let kept = steps.saturating_sub(burn_steps).max(1);
    let per_path: Vec<Vec<OccupationGrid>> = par_map(paths, |p| {
        let mut rng = path_rng(cfg.seed, p as u64);
        let start: Vec<f64> = (0..spec.d()).map(|_| rng.gen::<f64>()).collect();
        let mut st = Stepper::new(spec, cfg.eps, cfg.h, cfg.scheme);
        let mut s = LiftedState::from_lift(&start);
        let mut out = vec![OccupationGrid::new(grid); blocks_per_path];
        for step in 1..=steps {
            st.step(&mut s, &mut rng)?;
            if step > burn_steps {
                let block = ((step - burn_steps - 1) * blocks_per_path / kept).min(blocks_per_path - 1);
                out[block].record(&s.y);
            }
        }
        Ok(out)
    })?;
    let mut batches = vec![OccupationGrid::new(grid); MIN_BATCHES.max(blocks_per_path)];
    let nb = batches.len();
    let mut pooled = OccupationGrid::new(grid);
    for (p, blocks) in per_path.into_iter().enumerate() {
        for (b, g) in blocks.into_iter().enumerate() {
            pooled = pooled.merge(&g)?;
            let slot = (p * blocks_per_path + b) % nb;
            batches[slot] = batches[slot].merge(&g)?;
        }
    }
    Ok(OccupationEnsemble {
        pooled,
        batches,
        burn_in,
        seed: cfg.seed,
        eps: cfg.eps,
    })
}

/// Pooled occupation histogram; see [`estimate_invariant_batched`].
pub fn estimate_invariant(spec: &ProblemSpec, cfg: &SimConfig, n: usize, burn_in: f64) -> Result<OccupationGrid> {
    estimate_invariant_batched(spec, cfg, n, burn_in).map(|e| e.pooled)
}

/// `∫ b dμ` estimated from the histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteringReport {
    pub residual: Vec<f64>,
    pub stderr: Vec<f64>,
    pub holds: bool,
}

/// `Σ_cells b(center) p_cell` with batch standard errors; holds iff every
/// component is below four standard errors (exact zeros always hold).
pub fn centering_residual(ens: &OccupationEnsemble, spec: &ProblemSpec) -> CenteringReport {
    centering_of(ens, spec.b(), spec)
}

pub(crate) fn centering_of(ens: &OccupationEnsemble, fields: &[Expr], spec: &ProblemSpec) -> CenteringReport {
    let (residual, stderr) = ens.expectation_with_stderr(fields, spec.bumps());
    let holds = residual
        .iter()
        .zip(&stderr)
        .all(|(r, s)| *r == 0.0 || r.abs() < 4.0 * s);
    CenteringReport {
        residual,
        stderr,
        holds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_adds_counts() {
        let g = Grid::new(4, 1);
        let a = OccupationGrid::from_counts(g, vec![1, 0, 2, 0]).unwrap();
        let b = OccupationGrid::from_counts(g, vec![0, 3, 1, 0]).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.counts, vec![1, 3, 3, 0]);
        assert_eq!(m.total, 7);
        assert_eq!(m, b.merge(&a).unwrap());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let g = Grid::new(3, 2);
        let h = OccupationGrid::from_counts(g, (0..9).collect()).unwrap();
        let s: f64 = h.probabilities().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn brownian_histogram_is_uniform() {
        let spec = ProblemSpec::brownian(2);
        let cfg = SimConfig::new(0.01, 20.0, 0.0, 4, 40);
        let ens = estimate_invariant_batched(&spec, &cfg, 8, 1.0).unwrap();
        let p = ens.pooled.probabilities();
        // batch spread of each cell probability
        for (i, &pi) in p.iter().enumerate() {
            let per: Vec<f64> = ens.batches.iter().map(|b| b.probabilities()[i]).collect();
            let (_, se) = mean_stderr(&per);
            assert!((pi - 1.0 / 64.0).abs() < 4.5 * se.max(1e-4), "cell {i}: {pi} ± {se}");
        }
    }

    #[test]
    fn constant_drift_is_not_centered() {
        let spec = ProblemSpec::constant(&[0.5, 0.0], 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let cfg = SimConfig::new(0.01, 5.0, 0.0, 4, 20);
        let ens = estimate_invariant_batched(&spec, &cfg, 8, 0.5).unwrap();
        let r = centering_residual(&ens, &spec);
        assert!((r.residual[0] - 0.5).abs() < 1e-12);
        assert!(!r.holds);
        let zero = centering_residual(&ens, &ProblemSpec::brownian(2));
        assert_eq!(zero.residual, vec![0.0, 0.0]);
        assert!(zero.holds);
    }
}
