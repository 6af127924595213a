//! Task implementations. Each task writes its artifacts into the output
//! directory and embeds the resolved configuration in every file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use cellhom::ergodic::{
    centering_residual, corrector, effective_a_displacement, effective_ac, effective_d, estimate_invariant_batched,
    CorrectorField, CorrectorKind, EffectiveCoefficients, OccupationEnsemble,
};
use cellhom::fields::{hormander_masks, ProblemSpec, TwoScale};
use cellhom::fk::{elliptic_eps, elliptic_hom, parabolic_eps, parabolic_hom, LimitModel};
use cellhom::io::{write_corrector, write_mask, write_occupation, EffectiveDocument};
use cellhom::lattice::{consistency_check, extract_support, period_lattice};
use cellhom::sde::{
    h4_estimate, reachability_check, simulate_ensemble, simulate_path, write_path_csv, EnsembleSummary, SimConfig,
};
use cellhom::verify::{verify, Suite};
use cellhom::{Assumption, Error};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CorrectorConfig, EffectiveMethod, GivenCoefficients, RunConfig};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    Simulate,
    Invariant,
    Assumptions,
    Corrector,
    Effective,
    Lattice,
    Elliptic,
    Parabolic,
    Verify,
}

pub fn run(task: Task, cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(Error::from)?;
    let mut ctx = Context { cfg, out: &out, config: serde_json::to_value(cfg).map_err(Error::from)? };
    match task {
        Task::Simulate => ctx.simulate(),
        Task::Invariant => ctx.invariant(),
        Task::Assumptions => ctx.assumptions(),
        Task::Corrector => ctx.corrector(),
        Task::Effective => ctx.effective(),
        Task::Lattice => ctx.lattice(),
        Task::Elliptic => ctx.elliptic(),
        Task::Parabolic => ctx.parabolic(),
        Task::Verify => ctx.verify(),
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    config: Value,
}

impl Context<'_> {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name)).map_err(Error::from)?))
    }

    fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<()> {
        let doc = json!({ "config": self.config, "result": result });
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &doc).map_err(Error::from)?;
        writeln!(w).map_err(Error::from)?;
        w.flush().map_err(Error::from)?;
        Ok(())
    }

    fn invariant_ensemble(&self, spec: &ProblemSpec) -> Result<OccupationEnsemble> {
        let sim = self.cfg.sim()?;
        Ok(estimate_invariant_batched(spec, &sim, self.cfg.n, self.cfg.burn_in(&sim))?)
    }

    fn simulate(&mut self) -> Result<()> {
        let spec = self.cfg.spec()?;
        let sim = self.cfg.sim()?;
        let x = self.cfg.start(spec.d())?;
        let path = simulate_path(&spec, &x, &sim, 0)?;
        write_path_csv(&path, self.create("path.csv")?)?;
        let ends = simulate_ensemble(&spec, &x, &sim)?;
        let lifts: Vec<Vec<f64>> = ends.iter().map(|s| s.lift()).collect();
        let physical: Vec<Vec<f64>> = lifts.iter().map(|l| l.iter().map(|v| v * sim.eps).collect()).collect();
        self.write_json(
            "simulate.json",
            &json!({
                "lifted": EnsembleSummary::from_points(&lifts, sim.seed),
                "physical": if sim.eps > 0.0 { Some(EnsembleSummary::from_points(&physical, sim.seed)) } else { None },
            }),
        )
    }

    fn invariant(&mut self) -> Result<()> {
        let spec = self.cfg.spec()?;
        let ens = self.invariant_ensemble(&spec)?;
        write_occupation(&ens.pooled, ens.seed, self.config.clone(), self.create("occupation.csv")?)?;
        let centering = centering_residual(&ens, &spec);
        self.write_json(
            "invariant.json",
            &json!({
                "total": ens.pooled.total,
                "batches": ens.batches.len(),
                "burn_in": ens.burn_in,
                "centering": centering,
            }),
        )
    }

    /// H2 (reachability of the ellipticity set), H4 (contraction before
    /// reaching the Hörmander set) and H5 (centering of `b`). The report is
    /// written before the first failure is returned.
    fn assumptions(&mut self) -> Result<()> {
        let spec = self.cfg.spec()?;
        let th = &self.cfg.thresholds;
        let sim = self.cfg.sim()?;
        let n = self.cfg.n;
        let masks = hormander_masks(&spec, n, th.bracket_depth)?;
        let mut failures: Vec<Error> = Vec::new();
        let reach = match reachability_check(&spec, &masks.u, th.t0, th.u_max, 0.0, n) {
            Ok(r) => {
                if !r.all_reachable {
                    failures.push(Error::assumption(
                        Assumption::H2,
                        format!("H2 fails: {} cells cannot reach U by t0 = {}", r.unreachable_cells.len(), th.t0),
                    ));
                }
                Some(r)
            }
            Err(e) if e.assumption_label().is_some() => {
                failures.push(e);
                None
            }
            Err(e) => return Err(e.into()),
        };
        let h4_cfg = SimConfig { n_paths: th.h4_paths, ..sim.clone() };
        let h4 = h4_estimate(&spec, masks.grid, &masks.v, th.h4_t, &h4_cfg)?;
        if !h4.holds {
            failures.push(Error::assumption(
                Assumption::H4,
                format!("H4 not supported: estimate {:.4} ± {:.4} at t = {}", h4.estimate, h4.stderr, th.h4_t),
            ));
        }
        let ens = self.invariant_ensemble(&spec)?;
        let centering = centering_residual(&ens, &spec);
        if !centering.holds {
            failures.push(Error::assumption(
                Assumption::H5,
                format!("H5 fails: b not centered, residual {:?}", centering.residual),
            ));
        }
        let messages: Vec<String> = failures.iter().map(|e| e.to_string()).collect();
        self.write_json(
            "assumptions.json",
            &json!({
                "u_cells": masks.u_count(),
                "v_cells": masks.v_count(),
                "bracket_depth": masks.depth,
                "undetermined": masks.undetermined,
                "reachability": reach,
                "h4": h4,
                "centering": centering,
                "failures": messages,
            }),
        )?;
        match failures.into_iter().next() {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    fn corrector_field(
        &self,
        spec: &ProblemSpec,
        cc: &CorrectorConfig,
        mu: Option<&OccupationEnsemble>,
    ) -> Result<CorrectorField> {
        let mut sim = self.cfg.sim()?;
        sim.eps = 0.0;
        if let Some(p) = cc.paths {
            sim.n_paths = p;
        }
        if let Some(h) = cc.h {
            sim.h = h;
        }
        let target = cc.target.clone().unwrap_or_else(|| spec.b().to_vec());
        Ok(corrector(spec, &target, cc.kind, &sim, self.cfg.n, cc.t_corr, mu)?)
    }

    fn corrector_config(&self) -> Result<&CorrectorConfig> {
        self.cfg
            .corrector
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a corrector block {t_corr}".into()))
    }

    fn corrector(&mut self) -> Result<()> {
        let spec = self.cfg.spec()?;
        let cc = self.corrector_config()?;
        let mu = self.invariant_ensemble(&spec)?;
        let field = self.corrector_field(&spec, cc, Some(&mu))?;
        write_corrector(&field, self.config.clone(), self.create("corrector.csv")?)?;
        Ok(())
    }

    /// `A` and `C` (and the constant part of `D` when `ê` is supplied).
    fn estimate_effective(&self, spec: &ProblemSpec, e_target: Option<&cellhom::fields::Expr>) -> Result<EffectiveCoefficients> {
        let ec = self
            .cfg
            .effective
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs an effective block {method, sim}".into()))?;
        let mut avg = ec.sim.clone();
        avg.eps = 0.0;
        let burn_in = self.cfg.burn_in.unwrap_or(0.1 * avg.t);
        match ec.method {
            EffectiveMethod::Displacement => Ok(effective_a_displacement(spec, &avg, burn_in)?),
            EffectiveMethod::Corrector => {
                let cc = self.corrector_config()?;
                let b_cc = CorrectorConfig { target: None, kind: CorrectorKind::Vector, ..cc.clone() };
                let b_hat = self.corrector_field(spec, &b_cc, None)?;
                let e_hat = match e_target {
                    Some(e) => {
                        let e_cc = CorrectorConfig { target: Some(vec![e.clone()]), kind: CorrectorKind::Scalar, ..cc.clone() };
                        Some(self.corrector_field(spec, &e_cc, None)?)
                    }
                    None => None,
                };
                Ok(effective_ac(spec, &b_hat, e_hat.as_ref(), &avg, burn_in, ec.override_flag)?)
            }
        }
    }

    fn effective(&mut self) -> Result<()> {
        let spec = self.cfg.spec()?;
        let eff = self.estimate_effective(&spec, None)?;
        self.write_json("effective.json", &EffectiveDocument::from(&eff))
    }

    fn lattice(&mut self) -> Result<()> {
        let spec = self.cfg.spec()?;
        let th = &self.cfg.thresholds;
        let ens = self.invariant_ensemble(&spec)?;
        let mask = extract_support(&ens.pooled, th.theta, th.clean_iters)?;
        write_mask(&mask, ens.seed, self.config.clone(), self.create("mask.csv")?)?;
        let lat = period_lattice(&mask, None, None)?;
        let consistency = match &self.cfg.effective {
            Some(_) => {
                let eff = self.estimate_effective(&spec, None)?;
                Some(consistency_check(&eff, &lat, th.eig_tol))
            }
            None => None,
        };
        self.write_json(
            "lattice.json",
            &json!({
                "rank": lat.rank,
                "basis": lat.hnf_basis,
                "generators": lat.generators,
                "span_frame": lat.span_frame,
                "component": lat.component,
                "components": mask.components(),
                "disconnected_warning": lat.disconnected_warning,
                "low_samples": mask.low_samples,
                "consistency": consistency,
            }),
        )
    }

    /// Limiting model from given coefficients or from estimates, with
    /// `D = D₀ + ∫ f dμ`.
    fn limit_model(
        &self,
        spec: &ProblemSpec,
        given: Option<&GivenCoefficients>,
        f: &TwoScale,
        e: Option<&cellhom::fields::Expr>,
    ) -> Result<LimitModel> {
        let d = spec.d();
        let (model, d0) = match given {
            Some(g) => {
                let a: Vec<f64> = g.a.iter().flatten().copied().collect();
                let c = g.c.clone().unwrap_or_else(|| vec![0.0; d]);
                if let Some(dv) = g.d {
                    return Ok(LimitModel::new(a, c)?.with_potential(dv, f.linear.clone())?);
                }
                if e.is_some() {
                    return Err(CliError::Config("given coefficients need D when e is present".into()));
                }
                (LimitModel::new(a, c)?, 0.0)
            }
            None => {
                let eff = self.estimate_effective(spec, e)?;
                let d0 = eff.d0.unwrap_or(0.0);
                (LimitModel::from_coefficients(&eff)?, d0)
            }
        };
        let f_mean = if f.has_fast() {
            let mut sim = self.cfg.sim()?;
            sim.eps = 0.0;
            let burn_in = self.cfg.burn_in(&sim);
            let slow = TwoScale { linear: Vec::new(), ..f.clone() };
            effective_d(spec, None, &slow, &vec![0.0; d], &sim, burn_in)?.0
        } else {
            f.constant
        };
        Ok(model.with_potential(d0 + f_mean, f.linear.clone())?)
    }

    fn elliptic(&mut self) -> Result<()> {
        let ec = self
            .cfg
            .elliptic
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs an elliptic block".into()))?;
        let spec = self.cfg.spec()?;
        let sim = self.cfg.sim()?;
        let est = match ec.eps {
            Some(eps) => elliptic_eps(&ec.problem, &spec, eps, &ec.x, &sim)?,
            None => {
                ec.problem.validate(spec.d(), spec.bumps())?;
                let model = self.limit_model(&spec, ec.coefficients.as_ref(), &ec.problem.f, None)?;
                let mut est = elliptic_hom(&ec.problem, &model, &ec.x, &sim)?;
                est.eps = None;
                est
            }
        };
        self.write_json("elliptic.json", &est)
    }

    fn parabolic(&mut self) -> Result<()> {
        let pc = self
            .cfg
            .parabolic
            .as_ref()
            .ok_or_else(|| CliError::Config("config needs a parabolic block".into()))?;
        let spec = self.cfg.spec()?;
        let sim = self.cfg.sim()?;
        pc.problem.validate(spec.d(), spec.bumps())?;
        match pc.eps {
            Some(eps) => {
                let mu = self.invariant_ensemble(&spec)?;
                let cc = self.corrector_config()?;
                let e_cc = CorrectorConfig {
                    target: Some(vec![pc.problem.e.clone()]),
                    kind: CorrectorKind::Scalar,
                    ..cc.clone()
                };
                let e_hat = self.corrector_field(&spec, &e_cc, Some(&mu))?;
                let est = parabolic_eps(&pc.problem, &spec, eps, &e_hat, &pc.x, &sim, Some(&mu))?;
                self.write_json("parabolic.json", &est)
            }
            None => {
                let e = (!pc.problem.e.is_zero()).then_some(&pc.problem.e);
                let model = self.limit_model(&spec, pc.coefficients.as_ref(), &pc.problem.f, e)?;
                let (value, stderr) = parabolic_hom(&pc.problem, &model, &pc.x, &sim)?;
                self.write_json(
                    "parabolic.json",
                    &json!({
                        "value": value,
                        "stderr": stderr,
                        "n_paths": sim.n_paths,
                        "seed": sim.seed,
                        "eps": Value::Null,
                        "model": model,
                    }),
                )
            }
        }
    }

    fn verify(&mut self) -> Result<()> {
        let suite = self.cfg.suite.unwrap_or(Suite::Quick);
        let report = verify(suite, self.cfg.master_seed());
        let mut w = self.create("verify.csv")?;
        w.write_all(report.to_csv().as_bytes()).map_err(Error::from)?;
        w.flush().map_err(Error::from)?;
        self.write_json("verify.json", &report)?;
        let failed = report.rows.iter().filter(|r| !r.pass).count();
        if failed > 0 {
            return Err(CliError::VerifyFailed(failed));
        }
        Ok(())
    }
}
