//! Offline phase: greedy, residual-driven assembly of the reduced basis and
//! precomputation of all reduced matrices.
//!
//! One greedy iteration: truth-solve at the current sample point, compress
//! the new snapshots against the basis, border-extend `b`, `h_q` and
//! `h_qq'`, then sweep the training grid with the cheap reduced solver and
//! move to the residual argmax. The sweep never touches the Hilbert-space
//! dimension.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affine::{AffineObservable, AffineOperator, StructureFactorMeta};
use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::model::ModelSpec;
use crate::online::{reduced_ground_with_theta, ReducedSolution};
use crate::params::{DomainBox, ParameterGrid, ParameterPoint};
use crate::truth::{warm_start_guess, SolveMethod, TruthConfig, TruthSolver};

/// Reduced observable: the Galerkin projections of the grouped one-sided
/// factors, pair-contracted, plus the metadata to evaluate the momentum
/// coefficients.
#[derive(Debug, Clone)]
pub struct ReducedObservable {
    pub label: String,
    pub meta: StructureFactorMeta,
    /// `pair_blocks[g * groups + g'] = sum_c (F_{g,c} B)^T (F_{g',c} B)`,
    /// each of the reduced dimension N.
    pub pair_blocks: Vec<DMatrix<f64>>,
}

impl ReducedObservable {
    pub fn groups(&self) -> usize {
        self.meta.groups()
    }
}

/// A visited greedy sample: parameter point, observed degeneracy and the
/// number of basis columns it contributed after compression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePoint {
    pub mu: ParameterPoint,
    pub degeneracy: usize,
    pub added: usize,
    pub grid_index: usize,
}

/// Per-iteration training log record (one JSON line each in the CLI).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyRecord {
    pub iteration: usize,
    pub grid_index: usize,
    pub mu: ParameterPoint,
    pub degeneracy: usize,
    pub added: usize,
    pub basis_size: usize,
    pub max_residual: f64,
    pub truth_iterations: usize,
    pub truth_method: SolveMethod,
    pub fallback: bool,
    pub wall_ms: f64,
}

/// The trained surrogate: basis, Gram matrix, reduced Hamiltonian terms,
/// cross-Gram blocks for the residual estimator, reduced observables and
/// the training history.
#[derive(Debug, Clone)]
pub struct ReducedBasisModel {
    pub(crate) model: Option<ModelSpec>,
    pub(crate) domain: DomainBox,
    pub(crate) full_dim: usize,
    pub(crate) basis: Option<DMatrix<f64>>,
    pub(crate) gram: DMatrix<f64>,
    pub(crate) h_red: Vec<DMatrix<f64>>,
    pub(crate) h_cross: Vec<DMatrix<f64>>,
    pub(crate) observables: Vec<ReducedObservable>,
    pub(crate) samples: Vec<SamplePoint>,
    pub(crate) history: Vec<GreedyRecord>,
    pub(crate) sigma_ref: f64,
    pub(crate) tol_degeneracy: f64,
    pub(crate) greedy_tol: f64,
    pub(crate) compress_tol: f64,
}

impl ReducedBasisModel {
    pub fn basis_size(&self) -> usize {
        self.gram.nrows()
    }

    pub fn q_terms(&self) -> usize {
        self.h_red.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn model(&self) -> Option<&ModelSpec> {
        self.model.as_ref()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn has_basis(&self) -> bool {
        self.basis.is_some()
    }

    /// Drop the stored basis block; scans and observable evaluations keep
    /// working, warm starts and occupation profiles do not.
    pub fn strip_basis(&mut self) {
        self.basis = None;
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn h_reduced(&self) -> &[DMatrix<f64>] {
        &self.h_red
    }

    /// Cross-Gram block `h_{qq'} = B^T H_q H_{q'} B`.
    pub fn h_cross(&self, q: usize, qp: usize) -> &DMatrix<f64> {
        &self.h_cross[q * self.q_terms() + qp]
    }

    pub fn observables(&self) -> &[ReducedObservable] {
        &self.observables
    }

    pub fn samples(&self) -> &[SamplePoint] {
        &self.samples
    }

    pub fn history(&self) -> &[GreedyRecord] {
        &self.history
    }

    pub fn sigma_ref(&self) -> f64 {
        self.sigma_ref
    }

    pub fn tol_degeneracy(&self) -> f64 {
        self.tol_degeneracy
    }

    pub fn greedy_tol(&self) -> f64 {
        self.greedy_tol
    }

    pub fn compress_tol(&self) -> f64 {
        self.compress_tol
    }

    /// Affine coefficients at `mu`; requires the model descriptor (always
    /// present for trained benchmark models, absent for ad-hoc bases).
    pub fn theta(&self, mu: &ParameterPoint) -> Result<Vec<f64>> {
        self.domain.check_contains(mu)?;
        match &self.model {
            Some(spec) => spec.theta(mu),
            None => Err(Error::MissingBlocks {
                what: "model descriptor (theta evaluator)",
            }),
        }
    }

    /// Assemble the reduced Hamiltonian `h(mu) = sum_q theta_q h_q`.
    pub fn reduced_hamiltonian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        if theta.len() != self.q_terms() {
            return Err(Error::DimensionMismatch {
                context: "theta coefficients",
                expected: self.q_terms(),
                found: theta.len(),
            });
        }
        let n = self.basis_size();
        let mut h = DMatrix::zeros(n, n);
        for (t, hq) in theta.iter().zip(&self.h_red) {
            h += *t * hq;
        }
        Ok(h)
    }

    /// Full-space Ritz vectors `B phi`; orthonormal because phi is
    /// b-orthonormal.
    pub fn lift(&self, sol: &ReducedSolution) -> Result<DMatrix<f64>> {
        let basis = self.basis.as_ref().ok_or(Error::MissingBlocks {
            what: "basis block (saved with --no-store-basis?)",
        })?;
        Ok(basis * &sol.phi)
    }

    /// Hierarchical prefix model with the first `n` basis vectors: all
    /// reduced blocks are leading submatrices of the full ones, so the
    /// truncation is exact. Samples whose columns are fully contained are
    /// kept in the metadata.
    pub fn truncate(&self, n: usize) -> ReducedBasisModel {
        let n = n.min(self.basis_size());
        let q = self.q_terms();
        let mut samples = Vec::new();
        let mut cum = 0;
        for s in &self.samples {
            if cum + s.added <= n {
                samples.push(s.clone());
            }
            cum += s.added;
        }
        ReducedBasisModel {
            model: self.model,
            domain: self.domain.clone(),
            full_dim: self.full_dim,
            basis: self.basis.as_ref().map(|b| b.columns(0, n).into_owned()),
            gram: self.gram.view((0, 0), (n, n)).into_owned(),
            h_red: self
                .h_red
                .iter()
                .map(|h| h.view((0, 0), (n, n)).into_owned())
                .collect(),
            h_cross: (0..q * q)
                .map(|i| self.h_cross[i].view((0, 0), (n, n)).into_owned())
                .collect(),
            observables: self
                .observables
                .iter()
                .map(|o| ReducedObservable {
                    label: o.label.clone(),
                    meta: o.meta.clone(),
                    pair_blocks: o
                        .pair_blocks
                        .iter()
                        .map(|p| p.view((0, 0), (n, n)).into_owned())
                        .collect(),
                })
                .collect(),
            samples,
            history: self
                .history
                .iter()
                .filter(|r| r.basis_size <= n)
                .cloned()
                .collect(),
            sigma_ref: self.sigma_ref,
            tol_degeneracy: self.tol_degeneracy,
            greedy_tol: self.greedy_tol,
            compress_tol: self.compress_tol,
        }
    }
}

/// Snapshot compression: orthogonal projection onto the complement of
/// span(B) in the b^-1 metric, followed by an SVD truncation at `tol_abs`.
/// Returns an orthonormal block U with `B^T U = 0`; empty when the
/// snapshots add nothing new.
pub fn compress(
    new_states: &DMatrix<f64>,
    basis: Option<&DMatrix<f64>>,
    gram: Option<&DMatrix<f64>>,
    tol_abs: f64,
) -> Result<DMatrix<f64>> {
    let mut r = new_states.clone();
    if let Some(b) = basis {
        if b.ncols() > 0 {
            let chol = gram
                .expect("gram matrix required alongside a basis")
                .clone()
                .cholesky()
                .ok_or(Error::Conditioning {
                    context: "snapshot compression",
                    detail: "Gram matrix not positive definite".into(),
                })?;
            // Two projection passes keep B^T U at working precision.
            for _ in 0..2 {
                let mut c = b.transpose() * &r;
                chol.solve_mut(&mut c);
                r -= b * c;
            }
        }
    }
    let (u, s) = thin_svd(&r)?;
    let keep = s.iter().take_while(|&&sv| sv > tol_abs).count();
    Ok(u.columns(0, keep).into_owned())
}

/// Incremental assembly of a reduced model: append orthonormal blocks and
/// border-update all reduced matrices, reusing every previously computed
/// entry.
pub struct ReducedBasisBuilder<'a> {
    op: &'a AffineOperator,
    rbm: ReducedBasisModel,
    /// Cached products H_q B, extended alongside the basis.
    hb: Vec<DMatrix<f64>>,
}

impl<'a> ReducedBasisBuilder<'a> {
    pub fn new(
        op: &'a AffineOperator,
        model: Option<ModelSpec>,
        tol_degeneracy: f64,
        greedy_tol: f64,
        compress_tol: f64,
    ) -> Self {
        let q = op.q_terms();
        let dim = op.dim();
        Self {
            op,
            rbm: ReducedBasisModel {
                model,
                domain: op.domain().clone(),
                full_dim: dim,
                basis: Some(DMatrix::zeros(dim, 0)),
                gram: DMatrix::zeros(0, 0),
                h_red: vec![DMatrix::zeros(0, 0); q],
                h_cross: vec![DMatrix::zeros(0, 0); q * q],
                observables: Vec::new(),
                samples: Vec::new(),
                history: Vec::new(),
                sigma_ref: 0.0,
                tol_degeneracy,
                greedy_tol,
                compress_tol,
            },
            hb: vec![DMatrix::zeros(dim, 0); q],
        }
    }

    pub fn rbm(&self) -> &ReducedBasisModel {
        &self.rbm
    }

    /// Append the orthonormal block `u` (with `B^T u ~ 0`) and border-update
    /// `b`, `h_q` and `h_qq'`. Cost O(Q nnz m' + Q^2 N m' dim); existing
    /// entries are copied, never recomputed.
    pub fn extend(&mut self, u: &DMatrix<f64>) -> Result<()> {
        let mp = u.ncols();
        if mp == 0 {
            return Ok(());
        }
        let q = self.op.q_terms();
        let n_old = self.rbm.basis_size();
        let n_new = n_old + mp;
        let basis = self.rbm.basis.as_ref().expect("builder keeps the basis");
        if u.nrows() != self.rbm.full_dim {
            return Err(Error::DimensionMismatch {
                context: "basis extension",
                expected: self.rbm.full_dim,
                found: u.nrows(),
            });
        }

        let hu: Vec<DMatrix<f64>> = self
            .op
            .terms()
            .iter()
            .map(|t| t.apply_block(u))
            .collect::<Result<_>>()?;

        // Gram border.
        let bu = basis.transpose() * u;
        let uu = symmetrize(u.transpose() * u);
        self.rbm.gram = grow(&self.rbm.gram, &bu, &bu.transpose().into_owned(), &uu);

        // Reduced Hamiltonian terms: top-right B^T H_q U, symmetric diagonal
        // block U^T H_q U.
        for qi in 0..q {
            let top = basis.transpose() * &hu[qi];
            let diag = symmetrize(u.transpose() * &hu[qi]);
            self.rbm.h_red[qi] = grow(
                &self.rbm.h_red[qi],
                &top,
                &top.transpose().into_owned(),
                &diag,
            );
        }

        // Cross-Gram blocks from the cached H_q B: the (q, q') top-right
        // border is (H_q B)^T (H_q' U); the bottom-left of (q', q) is its
        // exact transpose, preserving h_qq'^T = h_q'q bitwise.
        let mut top_blocks = vec![DMatrix::zeros(0, 0); q * q];
        let mut corner = vec![DMatrix::zeros(0, 0); q * q];
        for qi in 0..q {
            for qj in 0..q {
                top_blocks[qi * q + qj] = self.hb[qi].transpose() * &hu[qj];
                if qj >= qi {
                    let block = hu[qi].transpose() * &hu[qj];
                    corner[qi * q + qj] = if qi == qj { symmetrize(block) } else { block };
                }
            }
        }
        for qi in 0..q {
            for qj in 0..qi {
                corner[qi * q + qj] = corner[qj * q + qi].transpose();
            }
        }
        for qi in 0..q {
            for qj in 0..q {
                let top = &top_blocks[qi * q + qj];
                let bottom = top_blocks[qj * q + qi].transpose();
                self.rbm.h_cross[qi * q + qj] = grow(
                    &self.rbm.h_cross[qi * q + qj],
                    top,
                    &bottom,
                    &corner[qi * q + qj],
                );
            }
        }

        // Extend the caches and the basis itself.
        for qi in 0..q {
            self.hb[qi] = hstack(&self.hb[qi], &hu[qi]);
        }
        let basis_new = hstack(basis, u);
        self.rbm.basis = Some(basis_new);
        debug_assert_eq!(self.rbm.basis_size(), n_new);
        Ok(())
    }

    /// Precompute the reduced observable pair blocks
    /// `sum_c (F_{g,c} B)^T (F_{g',c} B)` and finish the model.
    pub fn finish(mut self, observables: &[AffineObservable]) -> Result<ReducedBasisModel> {
        self.rbm.observables = reduce_observables(
            self.rbm.basis.as_ref().expect("builder keeps the basis"),
            observables,
        )?;
        Ok(self.rbm)
    }
}

/// Galerkin-project grouped observables onto a basis.
pub fn reduce_observables(
    basis: &DMatrix<f64>,
    observables: &[AffineObservable],
) -> Result<Vec<ReducedObservable>> {
    observables
        .iter()
        .map(|obs| {
            let g = obs.groups();
            let n = basis.ncols();
            let mut pair_blocks = vec![DMatrix::zeros(n, n); g * g];
            for comp in 0..obs.components() {
                let applied: Vec<DMatrix<f64>> = crate::util::par_map_indexed(g, |grp| {
                    obs.factor(grp, comp)
                        .apply_block(basis)
                        .expect("observable factors match the operator dimension")
                });
                for a in 0..g {
                    for b in a..g {
                        let block = applied[a].transpose() * &applied[b];
                        if b == a {
                            pair_blocks[a * g + a] += symmetrize(block);
                        } else {
                            let t = block.transpose();
                            pair_blocks[a * g + b] += block;
                            pair_blocks[b * g + a] += t;
                        }
                    }
                }
            }
            Ok(ReducedObservable {
                label: obs.label().to_string(),
                meta: obs.meta().clone(),
                pair_blocks,
            })
        })
        .collect()
}

/// A-posteriori residual estimate, Hilbert-space free:
/// `Res^2 = sum_qq' theta_q theta_q' tr(phi^T h_qq' phi)
///          - sum_i lambda_i^2 phi_i^T b phi_i`.
/// Tiny negative round-off (within 1e-10 of the term scale) clamps to zero;
/// anything beyond that window reports a conditioning error.
///
/// With a single shared `lambda` this is the textbook affine form; when the
/// reduced cluster is only degenerate within a loose tolerance the column
/// Ritz values split and the shared-lambda form loses positivity, so the
/// manifold-summed entry point feeds the per-column values.
pub fn residual(
    rbm: &ReducedBasisModel,
    theta: &[f64],
    phi: &DMatrix<f64>,
    lambda: f64,
) -> Result<f64> {
    residual_with_scale(rbm, theta, phi, &[lambda]).map(|(r, _)| r)
}

/// Like [`residual`], also returning the cancellation scale of the affine
/// formula: the sum of the magnitudes of the terms whose difference forms
/// Res^2. Values of Res below about sqrt(eps * scale) are numerically
/// indistinguishable from zero. `lambdas` holds one Ritz value per column
/// of `phi` (a single entry is broadcast).
pub fn residual_with_scale(
    rbm: &ReducedBasisModel,
    theta: &[f64],
    phi: &DMatrix<f64>,
    lambdas: &[f64],
) -> Result<(f64, f64)> {
    let q = rbm.q_terms();
    if theta.len() != q {
        return Err(Error::DimensionMismatch {
            context: "theta coefficients",
            expected: q,
            found: theta.len(),
        });
    }
    if lambdas.len() != 1 && lambdas.len() != phi.ncols() {
        return Err(Error::DimensionMismatch {
            context: "residual Ritz values",
            expected: phi.ncols(),
            found: lambdas.len(),
        });
    }
    let mut value = 0.0f64;
    let mut scale = 0.0f64;
    for qi in 0..q {
        for qj in 0..q {
            let (s, s_abs) = quad_trace(&rbm.h_cross[qi * q + qj], phi);
            let w = theta[qi] * theta[qj];
            value += w * s;
            scale += w.abs() * s_abs;
        }
    }
    let lam = |i: usize| {
        if lambdas.len() == 1 {
            lambdas[0]
        } else {
            lambdas[i]
        }
    };
    for i in 0..phi.ncols() {
        let col = phi.column(i).into_owned();
        let col_m = DMatrix::from_column_slice(phi.nrows(), 1, col.as_slice());
        let (b_tr, b_abs) = quad_trace(&rbm.gram, &col_m);
        let l2 = lam(i) * lam(i);
        value -= l2 * b_tr;
        scale += l2 * b_abs;
    }
    if value < 0.0 {
        if value >= -1e-10 * scale.max(1.0) {
            value = 0.0;
        } else {
            return Err(Error::Conditioning {
                context: "residual estimator",
                detail: format!("Res^2 = {value:.3e} at scale {scale:.3e}"),
            });
        }
    }
    Ok((value.sqrt(), scale))
}

/// Residual of a reduced solution at its own parameter point, with the
/// per-member Ritz values of the reduced cluster.
pub fn residual_of(rbm: &ReducedBasisModel, theta: &[f64], sol: &ReducedSolution) -> Result<f64> {
    residual_with_scale(rbm, theta, &sol.phi, &sol.ritz_values).map(|(r, _)| r)
}

/// tr(phi^T M phi), plus the same contraction over absolute values (the
/// round-off scale of the signed result).
fn quad_trace(m: &DMatrix<f64>, phi: &DMatrix<f64>) -> (f64, f64) {
    let mut acc = 0.0;
    let mut acc_abs = 0.0;
    for j in 0..phi.ncols() {
        let col = phi.column(j);
        for c in 0..m.ncols() {
            let xc = col[c];
            if xc == 0.0 {
                continue;
            }
            let mc = m.column(c);
            let mut dot = 0.0;
            let mut dot_abs = 0.0;
            for r in 0..m.nrows() {
                let p = mc[r] * col[r];
                dot += p;
                dot_abs += p.abs();
            }
            acc += dot * xc;
            acc_abs += dot_abs * xc.abs();
        }
    }
    (acc, acc_abs)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}

/// [[old, top], [bottom, corner]].
fn grow(
    old: &DMatrix<f64>,
    top: &DMatrix<f64>,
    bottom: &DMatrix<f64>,
    corner: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n_old = old.nrows();
    let mp = corner.nrows();
    let n = n_old + mp;
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (n_old, n_old)).copy_from(old);
    out.view_mut((0, n_old), (n_old, mp)).copy_from(top);
    out.view_mut((n_old, 0), (mp, n_old)).copy_from(bottom);
    out.view_mut((n_old, n_old), (mp, mp)).copy_from(corner);
    out
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Greedy training configuration.
#[derive(Debug, Clone)]
pub struct GreedyConfig {
    pub train_grid: ParameterGrid,
    /// Stop when the maximal residual over the training grid drops below
    /// this (absolute, in scaled energy units).
    pub tol: f64,
    /// Truth-solve budget n_f.
    pub max_truth_solves: usize,
    pub mu_1: ParameterPoint,
    /// Snapshot truncation threshold, relative to the largest singular
    /// value of the first snapshot block.
    pub compress_tol: f64,
    /// Optional hard cap on the basis size N.
    pub max_basis: Option<usize>,
    pub truth: TruthConfig,
}

impl GreedyConfig {
    pub fn new(train_grid: ParameterGrid, mu_1: ParameterPoint) -> Self {
        Self {
            train_grid,
            tol: 1e-6,
            max_truth_solves: 200,
            mu_1,
            compress_tol: 1e-10,
            max_basis: None,
            truth: TruthConfig::default(),
        }
    }

    fn validate(&self, op: &AffineOperator) -> Result<usize> {
        if self.tol < 0.0 {
            return Err(Error::Config("greedy tol must be nonnegative".into()));
        }
        if self.max_truth_solves == 0 {
            return Err(Error::Config("max_truth_solves must be positive".into()));
        }
        for p in [
            self.train_grid.point(0),
            self.train_grid.point(self.train_grid.len() - 1),
        ] {
            op.domain().check_contains(&p)?;
        }
        self.train_grid
            .index_of(&self.mu_1)
            .ok_or_else(|| Error::Config(format!("mu_1 = {} is not a training-grid point", self.mu_1)))
    }
}

/// Result of a greedy run. `abort` carries the truth-solver failure message
/// when training stopped early; the partial model is still returned.
pub struct TrainOutcome {
    pub rbm: ReducedBasisModel,
    pub converged: bool,
    pub abort: Option<String>,
}

/// Run the greedy offline loop. `on_iter` observes each iteration record
/// (the same records end up in the model's history).
pub fn greedy_train(
    op: &AffineOperator,
    model: Option<ModelSpec>,
    observables: &[AffineObservable],
    cfg: &GreedyConfig,
    mut on_iter: impl FnMut(&GreedyRecord),
) -> Result<TrainOutcome> {
    let mu1_index = cfg.validate(op)?;
    let grid = &cfg.train_grid;
    let solver = TruthSolver::new(cfg.truth.clone());
    let mut builder = ReducedBasisBuilder::new(
        op,
        model,
        cfg.truth.tol_degeneracy,
        cfg.tol,
        cfg.compress_tol,
    );

    // Affine coefficients over the grid are parameter-only work; precompute.
    let thetas: Vec<Vec<f64>> = grid
        .iter()
        .map(|mu| op.theta(&mu))
        .collect::<Result<_>>()?;

    let mut visited = vec![false; grid.len()];
    let mut next_index = mu1_index;
    let mut converged = false;
    let mut abort = None;

    for iteration in 1..=cfg.max_truth_solves {
        let started = crate::util::Stopwatch::start();
        let grid_index = next_index;
        let mu = grid.point(grid_index);
        visited[grid_index] = true;

        let guess = if builder.rbm().basis_size() > 0 {
            Some(warm_start_guess(builder.rbm(), &mu)?)
        } else {
            None
        };
        let h = op.assemble(&mu)?;
        let manifold = match solver.solve(&h, &mu, guess.as_ref()) {
            Ok(m) => m,
            Err(err) => {
                abort = Some(format!("truth solve failed at {mu}: {err}"));
                break;
            }
        };

        if builder.rbm.sigma_ref == 0.0 {
            let (_, s) = thin_svd(&manifold.states)?;
            builder.rbm.sigma_ref = s.first().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
        }
        let tol_abs = cfg.compress_tol * builder.rbm.sigma_ref;
        let u = compress(
            &manifold.states,
            builder.rbm.basis.as_ref().filter(|b| b.ncols() > 0),
            Some(&builder.rbm.gram).filter(|g| g.nrows() > 0),
            tol_abs,
        )?;
        builder.extend(&u)?;
        builder.rbm.samples.push(SamplePoint {
            mu: mu.clone(),
            degeneracy: manifold.degeneracy(),
            added: u.ncols(),
            grid_index,
        });

        // Reduced sweep over the training grid; deterministic argmax with
        // lowest-index tie-breaking, visited points excluded from selection.
        let rbm_ref = builder.rbm();
        let tol_deg = cfg.truth.tol_degeneracy;
        let residuals: Vec<Result<f64>> = crate::util::par_map_indexed(grid.len(), |i| {
            let sol =
                reduced_ground_with_theta(rbm_ref, grid.point(i), &thetas[i], tol_deg)?;
            residual_of(rbm_ref, &thetas[i], &sol)
        });
        let mut max_residual = 0.0f64;
        let mut argmax_unvisited: Option<usize> = None;
        let mut best_unvisited = f64::NEG_INFINITY;
        for (i, r) in residuals.iter().enumerate() {
            let r = match r {
                Ok(v) => *v,
                Err(e) => {
                    abort = Some(format!("reduced sweep failed at {}: {e}", grid.point(i)));
                    break;
                }
            };
            max_residual = max_residual.max(r);
            if !visited[i] && r > best_unvisited {
                best_unvisited = r;
                argmax_unvisited = Some(i);
            }
        }
        if abort.is_some() {
            break;
        }

        let record = GreedyRecord {
            iteration,
            grid_index,
            mu,
            degeneracy: manifold.degeneracy(),
            added: u.ncols(),
            basis_size: builder.rbm().basis_size(),
            max_residual,
            truth_iterations: manifold.info.iterations,
            truth_method: manifold.info.method,
            fallback: manifold.info.fallback,
            wall_ms: started.elapsed_ms(),
        };
        builder.rbm.history.push(record.clone());
        on_iter(&record);

        if max_residual <= cfg.tol {
            converged = true;
            break;
        }
        if let Some(cap) = cfg.max_basis {
            if builder.rbm().basis_size() >= cap {
                break;
            }
        }
        match argmax_unvisited {
            Some(i) => next_index = i,
            None => break,
        }
    }

    let rbm = builder.finish(observables)?;
    Ok(TrainOutcome {
        rbm,
        converged,
        abort,
    })
}
