//! Interactive browser demo of the reduced-basis workflow on a chain of
//! Rydberg atoms: train a surrogate in the page, then explore the phase
//! diagram (occupation map) and momentum-resolved structure factors live.

use js_sys::Float64Array;
use wasm_bindgen::prelude::*;

use spinrb_core::affine::{AffineObservable, AffineOperator};
use spinrb_core::model::{build_rydberg, occupation_profile, rydberg_structure_factor, ModelSpec};
use spinrb_core::offline::{greedy_train, GreedyConfig, ReducedBasisModel};
use spinrb_core::online::{observable_curve, reduced_ground};
use spinrb_core::params::{ParameterGrid, ParameterPoint};
use spinrb_core::truth::{TruthConfig, TruthSolver};

fn err_js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn stringify(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// A Rydberg-chain surrogate session owned by the page.
#[wasm_bindgen]
pub struct RydbergDemo {
    nx: usize,
    op: AffineOperator,
    obs: AffineObservable,
    rbm: Option<ReducedBasisModel>,
}

impl RydbergDemo {
    pub fn create(nx: usize) -> Result<RydbergDemo, String> {
        if !(2..=10).contains(&nx) {
            return Err("chain length must be between 2 and 10".into());
        }
        let (op, _) = build_rydberg(nx).map_err(stringify)?;
        let obs = rydberg_structure_factor(nx).map_err(stringify)?;
        Ok(RydbergDemo {
            nx,
            op,
            obs,
            rbm: None,
        })
    }

    pub fn train_impl(
        &mut self,
        grid_n: usize,
        tol: f64,
        max_solves: usize,
    ) -> Result<String, String> {
        let grid =
            ParameterGrid::uniform(self.op.domain(), &[grid_n, grid_n]).map_err(stringify)?;
        let mu_1 = grid.point(grid.len() / 2);
        let mut cfg = GreedyConfig::new(grid, mu_1);
        cfg.tol = tol.max(1e-12);
        cfg.max_truth_solves = max_solves.clamp(1, 200);
        cfg.truth = TruthConfig {
            dense_direct: 64,
            ..TruthConfig::default()
        };
        let spec = ModelSpec::RydbergChain { nx: self.nx };
        let mut history = Vec::new();
        let outcome = greedy_train(
            &self.op,
            Some(spec),
            std::slice::from_ref(&self.obs),
            &cfg,
            |rec| {
                history.push(serde_json::json!({
                    "iteration": rec.iteration,
                    "basis_size": rec.basis_size,
                    "max_residual": rec.max_residual,
                    "mu": rec.mu.coords(),
                    "degeneracy": rec.degeneracy,
                }));
            },
        )
        .map_err(stringify)?;
        self.rbm = Some(outcome.rbm);
        serde_json::to_string(&serde_json::json!({
            "converged": outcome.converged,
            "basis_size": self.rbm.as_ref().unwrap().basis_size(),
            "history": history,
        }))
        .map_err(stringify)
    }

    pub fn basis_size_impl(&self) -> usize {
        self.rbm.as_ref().map_or(0, |m| m.basis_size())
    }

    pub fn occupation_map_impl(&self, w: usize, h: usize) -> Result<Vec<f64>, String> {
        let rbm = self.rbm.as_ref().ok_or("train first")?;
        let domain = self.op.domain();
        let (lo, hi) = (domain.lo(), domain.hi());
        let mut out = Vec::with_capacity(w * h);
        for j in 0..h {
            for i in 0..w {
                let mu1 = lo[0] + (hi[0] - lo[0]) * i as f64 / (w.max(2) - 1) as f64;
                let mu2 = lo[1] + (hi[1] - lo[1]) * j as f64 / (h.max(2) - 1) as f64;
                let mu = ParameterPoint::from([mu1, mu2]);
                let value = reduced_ground(rbm, &mu, rbm.tol_degeneracy())
                    .and_then(|sol| rbm.lift(&sol))
                    .map(|lifted| occupation_profile(&lifted))
                    .unwrap_or(f64::NAN);
                out.push(value);
            }
        }
        Ok(out)
    }

    pub fn structure_factor_impl(&self, mu1: f64, mu2: f64) -> Result<String, String> {
        let rbm = self.rbm.as_ref().ok_or("train first")?;
        let mu = ParameterPoint::from([mu1, mu2]);
        let theta = self.op.theta(&mu).map_err(stringify)?;
        let sol = spinrb_core::online::reduced_ground_with_theta(
            rbm,
            mu.clone(),
            &theta,
            rbm.tol_degeneracy(),
        )
        .map_err(stringify)?;
        let (sf_rb, _) = observable_curve(rbm, &sol, 0).map_err(stringify)?;
        let res = spinrb_core::offline::residual_of(rbm, &theta, &sol).map_err(stringify)?;

        let solver = TruthSolver::new(TruthConfig {
            dense_direct: 64,
            ..TruthConfig::default()
        });
        let h = self.op.assemble(&mu).map_err(stringify)?;
        let guess = spinrb_core::truth::warm_start_guess(rbm, &mu).map_err(stringify)?;
        let truth = solver.solve(&h, &mu, Some(&guess)).map_err(stringify)?;
        let (sf_truth, _) = self
            .obs
            .evaluate_manifold(&truth.states)
            .map_err(stringify)?;

        let k: Vec<f64> = self.obs.meta().momenta.iter().map(|k| k[0]).collect();
        serde_json::to_string(&serde_json::json!({
            "lambda_rb": sol.lambda_rb,
            "lambda_truth": truth.lambda,
            "degeneracy": sol.degeneracy(),
            "residual": res,
            "sf_rb": sf_rb,
            "sf_truth": sf_truth,
            "k": k,
        }))
        .map_err(stringify)
    }

    pub fn domain_impl(&self) -> [f64; 4] {
        let d = self.op.domain();
        [d.lo()[0], d.lo()[1], d.hi()[0], d.hi()[1]]
    }
}

// Thin wasm-bindgen surface; the JsValue conversions abort off-wasm, so the
// logic above stays callable from native tests.
#[wasm_bindgen]
impl RydbergDemo {
    /// Chain length between 2 and 10 sites keeps everything interactive.
    #[wasm_bindgen(constructor)]
    pub fn new(nx: usize) -> Result<RydbergDemo, JsValue> {
        Self::create(nx).map_err(|e| err_js(e))
    }

    /// Run the greedy offline loop on a `grid_n` x `grid_n` training grid.
    /// Returns JSON: `{converged, basis_size, history: [{iteration,
    /// basis_size, max_residual, mu, degeneracy}, ...]}`.
    pub fn train(&mut self, grid_n: usize, tol: f64, max_solves: usize) -> Result<String, JsValue> {
        self.train_impl(grid_n, tol, max_solves).map_err(|e| err_js(e))
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size_impl()
    }

    /// Occupation-profile heatmap over the parameter domain on a `w` x `h`
    /// raster (row-major, mu_1 along x).
    pub fn occupation_map(&self, w: usize, h: usize) -> Result<Float64Array, JsValue> {
        self.occupation_map_impl(w, h)
            .map(|v| Float64Array::from(v.as_slice()))
            .map_err(|e| err_js(e))
    }

    /// Surrogate diagnostics and structure factor at one parameter point
    /// with the exact curve for comparison. JSON: `{lambda_rb, lambda_truth,
    /// degeneracy, residual, sf_rb, sf_truth, k}`.
    pub fn structure_factor(&self, mu1: f64, mu2: f64) -> Result<String, JsValue> {
        self.structure_factor_impl(mu1, mu2).map_err(|e| err_js(e))
    }

    /// Domain box as [lo0, lo1, hi0, hi1] for axis labeling.
    pub fn domain(&self) -> Float64Array {
        Float64Array::from(self.domain_impl().as_slice())
    }
}
