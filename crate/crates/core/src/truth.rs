//! Exact ground-manifold computation ("truth solves") with adaptive
//! degeneracy detection, warm starting and a dense fallback.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_trim, sym_eig};
use crate::lobpcg::{lobpcg, LobpcgOptions};
use crate::offline::ReducedBasisModel;
use crate::params::ParameterPoint;
use crate::sparse::SparseHermitian;

/// Fixed seed for cold-start random blocks; reproducible across runs.
pub const COLD_START_SEED: u64 = 0x5eed_0ba5;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TruthConfig {
    /// Absolute residual target per eigenpair.
    pub tol_resid: f64,
    /// Eigenvalues within this distance of the smallest form the manifold;
    /// the gap above the cluster must exceed it to certify the degeneracy.
    pub tol_degeneracy: f64,
    pub max_iter: usize,
    /// Largest dimension accepted by the dense fallback.
    pub dense_cap: usize,
    /// Dimension at or below which the solver goes dense immediately.
    pub dense_direct: usize,
    /// Block-size increment when the degenerate cluster fills the block.
    pub degeneracy_step: usize,
    pub seed: u64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            tol_resid: 1e-10,
            tol_degeneracy: 1e-8,
            max_iter: 800,
            dense_cap: 1 << 14,
            dense_direct: 128,
            degeneracy_step: 4,
            seed: COLD_START_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Iterative,
    Dense,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverInfo {
    pub method: SolveMethod,
    pub iterations: usize,
    pub converged: bool,
    /// Times the target block had to grow to fit the degenerate cluster.
    pub adapt_rounds: usize,
    /// True when the iterative solver gave up and the dense path took over.
    pub fallback: bool,
}

/// All eigenvectors of the smallest eigenvalue at one parameter point.
#[derive(Debug, Clone)]
pub struct GroundStateManifold {
    pub mu: ParameterPoint,
    pub lambda: f64,
    /// Orthonormal columns spanning the ground eigenspace.
    pub states: DMatrix<f64>,
    /// Distance from lambda to the first eigenvalue above the cluster.
    pub gap: f64,
    pub info: SolverInfo,
}

impl GroundStateManifold {
    pub fn degeneracy(&self) -> usize {
        self.states.ncols()
    }

    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    /// max |states^T states - I|.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.degeneracy();
        let gram = self.states.transpose() * &self.states;
        let mut defect = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[(i, j)] - target).abs());
            }
        }
        defect
    }

    /// Per-column 2-norm residuals ||H psi - lambda psi||.
    pub fn residual_norms(&self, h: &SparseHermitian) -> Result<Vec<f64>> {
        let hs = h.apply_block(&self.states)?;
        Ok((0..self.degeneracy())
            .map(|j| (hs.column(j) - self.lambda * self.states.column(j)).norm())
            .collect())
    }
}

/// Deterministic pseudo-random block for cold starts.
pub fn random_block(dim: usize, width: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(dim, width, |_, _| rng.random_range(-0.5..0.5))
}

/// Initial guess block for the truth solve at `mu`: the lifted surrogate
/// manifold of the current reduced model, orthonormalized; falls back to a
/// fixed-seed random block while the basis is empty.
pub fn warm_start_guess(rbm: &ReducedBasisModel, mu: &ParameterPoint) -> Result<DMatrix<f64>> {
    if rbm.basis_size() == 0 {
        return Ok(random_block(rbm.full_dim(), 2, COLD_START_SEED));
    }
    // Lift the predicted manifold plus the next reduced Ritz vector: the
    // extra column lets the solver certify the gap above the cluster
    // without converging a random direction from scratch.
    let block = crate::online::reduced_lowest_block(rbm, mu, 1)?;
    let lifted = rbm
        .basis()
        .ok_or(crate::error::Error::MissingBlocks {
            what: "basis block (needed for warm starts)",
        })?
        * block;
    let q = orthonormalize_trim(&lifted, 1e-12)?;
    if q.ncols() == 0 {
        return Ok(random_block(rbm.full_dim(), 2, COLD_START_SEED));
    }
    Ok(q)
}

pub struct TruthSolver {
    cfg: TruthConfig,
}

impl TruthSolver {
    pub fn new(cfg: TruthConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &TruthConfig {
        &self.cfg
    }

    /// Ground manifold of `h`, using `guess` to size and seed the initial
    /// block. The block grows until the eigenvalue gap above the degenerate
    /// cluster exceeds the degeneracy tolerance.
    pub fn solve(
        &self,
        h: &SparseHermitian,
        mu: &ParameterPoint,
        guess: Option<&DMatrix<f64>>,
    ) -> Result<GroundStateManifold> {
        let dim = h.dim();
        if dim <= self.cfg.dense_direct {
            return self.solve_dense_manifold(h, mu, false, 0);
        }

        let mut k = guess.map_or(2, |g| g.ncols().max(2)).min(dim);
        let mut seed_block = guess.cloned();
        let mut total_iterations = 0usize;
        let mut adapt_rounds = 0usize;

        loop {
            let x0 = self.initial_block(dim, k, seed_block.as_ref());
            let out = lobpcg(
                h,
                x0,
                &LobpcgOptions {
                    tol: self.cfg.tol_resid,
                    max_iter: self.cfg.max_iter,
                    cluster_tol: Some(self.cfg.tol_degeneracy),
                },
            )?;
            total_iterations += out.iterations;

            if !out.converged {
                if out.cluster_filled && k < dim {
                    // Every targeted eigenpair is inside the bottom
                    // cluster: widen the block and re-solve from the
                    // current vectors.
                    adapt_rounds += 1;
                    k = (k + self.cfg.degeneracy_step).min(dim);
                    seed_block = Some(out.eigvecs);
                    continue;
                }
                if dim <= self.cfg.dense_cap {
                    return self.solve_dense_manifold(h, mu, true, total_iterations);
                }
                return Err(Error::SolverFailure {
                    mu: Some(mu.coords().to_vec()),
                    iterations: total_iterations,
                    residual: out
                        .residual_norms
                        .iter()
                        .cloned()
                        .fold(0.0f64, f64::max),
                });
            }

            let m = cluster_size(&out.eigvals, self.cfg.tol_degeneracy);
            if m < k || k == dim {
                let gap = if m < k {
                    out.eigvals[m] - out.eigvals[0]
                } else {
                    f64::INFINITY
                };
                let states = out.eigvecs.columns(0, m).into_owned();
                return Ok(GroundStateManifold {
                    mu: mu.clone(),
                    lambda: out.eigvals[0],
                    states,
                    gap,
                    info: SolverInfo {
                        method: SolveMethod::Iterative,
                        iterations: total_iterations,
                        converged: true,
                        adapt_rounds,
                        fallback: false,
                    },
                });
            }

            // Cluster fills the block: grow and re-solve from the converged
            // vectors.
            adapt_rounds += 1;
            k = (k + self.cfg.degeneracy_step).min(dim);
            seed_block = Some(out.eigvecs);
        }
    }

    /// Full dense spectrum, clustered with the same degeneracy tolerance.
    pub fn solve_dense(
        &self,
        h: &SparseHermitian,
        mu: &ParameterPoint,
    ) -> Result<(GroundStateManifold, Vec<f64>)> {
        let manifold = self.solve_dense_manifold(h, mu, false, 0)?;
        let (vals, _) = sym_eig(&h.to_dense())?;
        Ok((manifold, vals))
    }

    fn solve_dense_manifold(
        &self,
        h: &SparseHermitian,
        mu: &ParameterPoint,
        fallback: bool,
        prior_iterations: usize,
    ) -> Result<GroundStateManifold> {
        let dim = h.dim();
        if dim > self.cfg.dense_cap {
            return Err(Error::DenseCapExceeded {
                dim,
                cap: self.cfg.dense_cap,
            });
        }
        let (vals, vecs) = sym_eig(&h.to_dense())?;
        let m = cluster_size(&vals, self.cfg.tol_degeneracy);
        let gap = if m < dim {
            vals[m] - vals[0]
        } else {
            f64::INFINITY
        };
        Ok(GroundStateManifold {
            mu: mu.clone(),
            lambda: vals[0],
            states: vecs.columns(0, m).into_owned(),
            gap,
            info: SolverInfo {
                method: SolveMethod::Dense,
                iterations: prior_iterations,
                converged: true,
                adapt_rounds: 0,
                fallback,
            },
        })
    }

    fn initial_block(&self, dim: usize, k: usize, seed: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(dim, k);
        let have = seed.map_or(0, |s| s.ncols().min(k));
        if let Some(s) = seed {
            x.columns_mut(0, have).copy_from(&s.columns(0, have));
        }
        if have < k {
            let pad = random_block(dim, k - have, self.cfg.seed);
            x.columns_mut(have, k - have).copy_from(&pad);
        }
        x
    }
}

/// Number of eigenvalues within `tol` of the smallest.
fn cluster_size(vals: &[f64], tol: f64) -> usize {
    let lo = vals[0];
    vals.iter().take_while(|&&v| v - lo <= tol).count()
}
