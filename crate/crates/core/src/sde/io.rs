//! Path dumps and ensemble summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::LiftedPath;
use crate::error::Result;

/// Writes `t,y1..yd,k1..kd` rows.
pub fn write_path_csv<W: Write>(path: &LiftedPath, mut w: W) -> Result<()> {
    let d = path.d;
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("y{i}")));
    header.extend((1..=d).map(|i| format!("k{i}")));
    writeln!(w, "{}", header.join(","))?;
    for s in &path.states {
        let mut row = vec![format!("{}", s.t)];
        row.extend(s.y.iter().map(|v| format!("{v}")));
        row.extend(s.k.iter().map(|v| format!("{v}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Mean, covariance and standard error of the mean of an ensemble of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub stderr: Vec<f64>,
    pub seed: u64,
    pub n: usize,
}

impl EnsembleSummary {
    pub fn from_points(points: &[Vec<f64>], seed: u64) -> Self {
        let n = points.len();
        let d = points.first().map_or(0, |p| p.len());
        let nf = n as f64;
        let mut mean = vec![0.0; d];
        for p in points {
            for i in 0..d {
                mean[i] += p[i] / nf;
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for p in points {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
                }
            }
        }
        let denom = (nf - 1.0).max(1.0);
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v /= denom;
            }
        }
        let stderr = (0..d).map(|i| (cov[i][i] / nf).sqrt()).collect();
        EnsembleSummary {
            mean,
            cov,
            stderr,
            seed,
            n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::LiftedState;

    #[test]
    fn csv_header_and_rows() {
        let path = LiftedPath {
            d: 2,
            states: vec![LiftedState {
                y: vec![0.5, 0.25],
                k: vec![1, -2],
                t: 0.0,
            }],
        };
        let mut buf = Vec::new();
        write_path_csv(&path, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,y1,y2,k1,k2\n0,0.5,0.25,1,-2\n");
    }
}
