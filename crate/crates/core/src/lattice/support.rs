//! Support masks extracted from occupation histograms.

use serde::{Deserialize, Serialize};

use crate::ergodic::OccupationGrid;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Samples below which a mask carries a low-sample warning.
pub const MIN_SUPPORT_SAMPLES: u64 = 100_000;

/// Default density threshold relative to the uniform density.
pub const DEFAULT_THETA: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportMask {
    pub grid: Grid,
    pub mask: Vec<bool>,
    pub theta: f64,
    pub clean_iters: usize,
    /// Component label of each masked cell (`None` outside the mask).
    pub labels: Vec<Option<usize>>,
    /// Cell count of each component, indexed by label.
    pub component_sizes: Vec<usize>,
    pub largest: usize,
    /// Set when the histogram had fewer than [`MIN_SUPPORT_SAMPLES`] samples.
    pub low_samples: bool,
}

impl SupportMask {
    /// Mask from explicit cells, labelled but not thresholded.
    pub fn from_cells(grid: Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::invalid("mask does not match the grid"));
        }
        if !mask.iter().any(|&b| b) {
            return Err(Error::EmptySupport);
        }
        let (labels, component_sizes) = label_components(grid, &mask);
        let largest = largest_component(&component_sizes);
        Ok(SupportMask {
            grid,
            mask,
            theta: 0.0,
            clean_iters: 0,
            labels,
            component_sizes,
            largest,
            low_samples: false,
        })
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn components(&self) -> usize {
        self.component_sizes.len()
    }

    /// Whether the mask is disconnected.
    pub fn disconnected(&self) -> bool {
        self.components() > 1
    }
}

fn largest_component(sizes: &[usize]) -> usize {
    // ties go to the lowest label
    let mut best = 0;
    for (i, &s) in sizes.iter().enumerate() {
        if s > sizes[best] {
            best = i;
        }
    }
    best
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Components under periodic face adjacency, labelled in order of their
/// lowest cell index.
fn label_components(grid: Grid, mask: &[bool]) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut parent: Vec<usize> = (0..grid.len()).collect();
    for c in 0..grid.len() {
        if !mask[c] {
            continue;
        }
        for axis in 0..grid.d {
            let (nb, _) = grid.neighbor(c, axis, 1);
            if mask[nb] {
                let (a, b) = (find(&mut parent, c), find(&mut parent, nb));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut labels = vec![None; grid.len()];
    let mut root_label = vec![usize::MAX; grid.len()];
    let mut sizes = Vec::new();
    for c in 0..grid.len() {
        if !mask[c] {
            continue;
        }
        let r = find(&mut parent, c);
        if root_label[r] == usize::MAX {
            root_label[r] = sizes.len();
            sizes.push(0);
        }
        labels[c] = Some(root_label[r]);
        sizes[root_label[r]] += 1;
    }
    (labels, sizes)
}

/// Cells whose density is at least `theta` times uniform, followed by
/// `clean_iters` rounds removing cells with at most one masked face neighbor.
pub fn extract_support(occ: &OccupationGrid, theta: f64, clean_iters: usize) -> Result<SupportMask> {
    let grid = occ.grid;
    if occ.total == 0 {
        return Err(Error::EmptySupport);
    }
    let cut = theta * occ.total as f64 / grid.len() as f64;
    let mut mask: Vec<bool> = occ.counts.iter().map(|&c| c as f64 >= cut && c > 0).collect();
    for _ in 0..clean_iters {
        let next: Vec<bool> = (0..grid.len())
            .map(|c| {
                mask[c] && {
                    let mut nbs = 0;
                    for axis in 0..grid.d {
                        for dir in [-1, 1] {
                            if mask[grid.neighbor(c, axis, dir).0] {
                                nbs += 1;
                            }
                        }
                    }
                    nbs > 1
                }
            })
            .collect();
        mask = next;
    }
    let mut out = SupportMask::from_cells(grid, mask)?;
    out.theta = theta;
    out.clean_iters = clean_iters;
    out.low_samples = occ.total < MIN_SUPPORT_SAMPLES;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_histogram_gives_full_mask() {
        let g = Grid::new(8, 2);
        let occ = OccupationGrid::from_counts(g, vec![1000; 64]).unwrap();
        let m = extract_support(&occ, DEFAULT_THETA, 1).unwrap();
        assert_eq!(m.count(), 64);
        assert_eq!(m.components(), 1);
        assert!(m.low_samples);
    }

    #[test]
    fn speckle_is_cleaned() {
        let g = Grid::new(8, 2);
        let mut counts = vec![0; 64];
        counts[g.flat_index(&[3, 3])] = 50;
        for i in 0..8 {
            counts[g.flat_index(&[0, i])] = 1000;
        }
        let occ = OccupationGrid::from_counts(g, counts).unwrap();
        let m = extract_support(&occ, DEFAULT_THETA, 1).unwrap();
        assert_eq!(m.count(), 8);
        assert_eq!(m.components(), 1);
    }

    #[test]
    fn periodic_adjacency_joins_edges() {
        let g = Grid::new(6, 1);
        let mask = vec![true, false, false, false, false, true];
        let m = SupportMask::from_cells(g, mask).unwrap();
        assert_eq!(m.components(), 1);
    }

    #[test]
    fn empty_histogram_errors() {
        let g = Grid::new(4, 2);
        let occ = OccupationGrid::from_counts(g, vec![0; 16]).unwrap();
        assert!(matches!(extract_support(&occ, 1e-3, 1), Err(Error::EmptySupport)));
    }
}
