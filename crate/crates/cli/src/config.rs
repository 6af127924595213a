//! Run configuration.

use std::path::PathBuf;

use cellhom::ergodic::CorrectorKind;
use cellhom::fields::{build_example, ExampleName, ExampleParams, Expr, ProblemSpec, SpecDocument};
use cellhom::fk::{EllipticProblem, ParabolicProblem};
use cellhom::lattice::DEFAULT_THETA;
use cellhom::sde::SimConfig;
use cellhom::verify::Suite;
use cellhom::{Error, Result};
use serde::{Deserialize, Serialize};

/// A named fixture or an inline problem document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Example {
        name: ExampleName,
        #[serde(default)]
        params: ExampleParams,
    },
    Inline(SpecDocument),
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        match self {
            ProblemConfig::Example { name, params } => build_example(*name, params),
            ProblemConfig::Inline(doc) => ProblemSpec::try_from(doc.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Support threshold relative to the uniform cell mass.
    pub theta: f64,
    pub clean_iters: usize,
    pub eig_tol: f64,
    pub bracket_depth: usize,
    /// Reachability horizon and control bound.
    pub t0: f64,
    pub u_max: f64,
    /// Horizon of the contraction estimate.
    pub h4_t: f64,
    pub h4_paths: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            theta: DEFAULT_THETA,
            clean_iters: 1,
            eig_tol: 0.02,
            bracket_depth: 2,
            t0: 2.0,
            u_max: 0.0,
            h4_t: 2.0,
            h4_paths: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorConfig {
    pub t_corr: f64,
    #[serde(default = "vector_kind")]
    pub kind: CorrectorKind,
    /// Right-hand side; the drift `b` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<Expr>>,
    /// Path count and step of the corrector; `sim` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

fn vector_kind() -> CorrectorKind {
    CorrectorKind::Vector
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveMethod {
    /// Corrector followed by the ergodic average of the coefficient integrand.
    #[default]
    Corrector,
    /// Long-time displacement covariance.
    Displacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    #[serde(default)]
    pub method: EffectiveMethod,
    /// Ergodic-average settings (`ε` is ignored).
    pub sim: SimConfig,
    #[serde(default)]
    pub override_flag: bool,
}

/// Homogenized coefficients given directly instead of estimated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GivenCoefficients {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C", default)]
    pub c: Option<Vec<f64>>,
    /// Constant part of `D`; the linear part is that of `f`.
    #[serde(rename = "D", default)]
    pub d: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticConfig {
    pub problem: EllipticProblem,
    pub x: Vec<f64>,
    /// Solve the ε-problem; the homogenized problem when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<GivenCoefficients>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicConfig {
    pub problem: ParabolicProblem,
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<GivenCoefficients>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    /// Master seed; overrides `sim.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Not embedded in outputs, so that runs differing only in the output
    /// directory produce identical files.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrector: Option<CorrectorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective: Option<EffectiveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elliptic: Option<EllipticConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parabolic: Option<ParabolicConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
}

fn default_n() -> usize {
    32
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Applies command-line overrides and fills the master seed into every
    /// simulation block.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let seed = seed.or(self.seed).or(self.sim.as_ref().map(|s| s.seed)).unwrap_or(0);
        self.seed = Some(seed);
        if let Some(sim) = self.sim.as_mut() {
            sim.seed = seed;
        }
        if let Some(e) = self.effective.as_mut() {
            e.sim.seed = cellhom::rng::derive_seed(seed, 1);
        }
        if out.is_some() {
            self.out = out;
        }
        self
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::invalid("config needs a problem"))?
            .build()
    }

    pub fn sim(&self) -> Result<SimConfig> {
        self.sim.clone().ok_or_else(|| Error::invalid("config needs a sim block {h, T, N}"))
    }

    pub fn burn_in(&self, sim: &SimConfig) -> f64 {
        self.burn_in.unwrap_or(0.1 * sim.t)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn start(&self, d: usize) -> Result<Vec<f64>> {
        let x = self.start.clone().unwrap_or_else(|| vec![0.0; d]);
        if x.len() != d {
            return Err(Error::invalid("start point has wrong dimension"));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_parses() {
        let cfg = RunConfig::from_json(
            r#"{"problem": {"example": {"name": "paper4"}}, "sim": {"h": 0.002, "T": 100, "N": 20}, "n": 64}"#,
        )
        .unwrap();
        assert_eq!(cfg.spec().unwrap().d(), 2);
        let cfg = cfg.resolve(Some(9), None);
        assert_eq!(cfg.sim().unwrap().seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"n": 8, "colour": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"thresholds": {"theta": 0.1, "gamma": 2}}"#).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = RunConfig::from_json(r#"{"problem": {"example": {"name": "oned_harmonic"}}, "sim": {"h": 0.01, "T": 1}}"#)
            .unwrap()
            .resolve(None, None);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}
