//! Regular cell grids on the unit torus.

use serde::{Deserialize, Serialize};

/// `n^d` cells of side `1/n`, indexed in row-major order with the last axis
/// fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub d: usize,
}

impl Grid {
    pub fn new(n: usize, d: usize) -> Self {
        assert!(n > 0 && d > 0, "grid needs n > 0 and d > 0");
        Grid { n, d }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for slot in out.iter_mut().rev() {
            *slot = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .into_iter()
            .map(|i| (i as f64 + 0.5) / self.n as f64)
            .collect()
    }

    /// Cell containing the torus point `y` (coordinates are wrapped first).
    pub fn cell_of(&self, y: &[f64]) -> usize {
        let n = self.n as f64;
        y.iter().fold(0, |acc, &yi| {
            let w = yi - yi.floor();
            let i = ((w * n) as usize).min(self.n - 1);
            acc * self.n + i
        })
    }

    /// Face neighbour of `idx` along `axis` in direction `dir` (±1) together
    /// with the winding offset picked up when crossing the identification.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i64) -> (usize, i64) {
        let mut multi = self.multi_index(idx);
        let i = multi[axis] as i64 + dir;
        let n = self.n as i64;
        let (wrapped, offset) = if i < 0 {
            (i + n, -1)
        } else if i >= n {
            (i - n, 1)
        } else {
            (i, 0)
        };
        multi[axis] = wrapped as usize;
        (self.flat_index(&multi), offset)
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = Grid::new(5, 3);
        for i in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
            assert_eq!(g.cell_of(&g.center(i)), i);
        }
    }

    #[test]
    fn neighbours_wrap_with_offset() {
        let g = Grid::new(4, 2);
        let (j, w) = g.neighbor(g.flat_index(&[3, 1]), 0, 1);
        assert_eq!(g.multi_index(j), vec![0, 1]);
        assert_eq!(w, 1);
        let (j, w) = g.neighbor(g.flat_index(&[2, 0]), 1, -1);
        assert_eq!(g.multi_index(j), vec![2, 3]);
        assert_eq!(w, -1);
    }
}
