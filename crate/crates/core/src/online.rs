//! Online phase: reduced ground solves, observable evaluation and parameter
//! sweeps, all independent of the Hilbert-space dimension.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::generalized_sym_eig;
use crate::model::occupation_profile;
use crate::offline::{residual_of, ReducedBasisModel};
use crate::params::{ParameterGrid, ParameterPoint};

/// Ground cluster of the reduced generalized eigenproblem
/// `h(mu) phi = lambda b phi`.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub mu: ParameterPoint,
    /// Ritz value of the reduced ground cluster (variational upper bound on
    /// the true ground energy).
    pub lambda_rb: f64,
    /// b-orthonormal coefficient block, one column per cluster member.
    pub phi: DMatrix<f64>,
    /// Ritz value of each cluster member (lambda_rb is the first).
    pub ritz_values: Vec<f64>,
    /// Distance from lambda_rb to the first reduced eigenvalue above the
    /// cluster.
    pub gap_rb: f64,
}

impl ReducedSolution {
    pub fn degeneracy(&self) -> usize {
        self.phi.ncols()
    }
}

/// Full reduced eigensolve: all N generalized eigenpairs, ascending.
fn reduced_eigpairs(
    rbm: &ReducedBasisModel,
    theta: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = rbm.basis_size();
    if n == 0 {
        return Err(Error::MissingBlocks {
            what: "reduced basis (model is empty)",
        });
    }
    let h = rbm.reduced_hamiltonian(theta)?;
    generalized_sym_eig(&h, rbm.gram())
}

/// Coefficient block of the reduced ground cluster plus `extra` further
/// Ritz vectors (clipped to the basis size); used for warm starts.
pub fn reduced_lowest_block(
    rbm: &ReducedBasisModel,
    mu: &ParameterPoint,
    extra: usize,
) -> Result<DMatrix<f64>> {
    let theta = rbm.theta(mu)?;
    let (vals, vecs) = reduced_eigpairs(rbm, &theta)?;
    let m = vals
        .iter()
        .take_while(|&&v| v - vals[0] <= rbm.tol_degeneracy())
        .count();
    let width = (m + extra).min(rbm.basis_size());
    Ok(vecs.columns(0, width).into_owned())
}

/// Reduced ground solve with explicit affine coefficients.
pub fn reduced_ground_with_theta(
    rbm: &ReducedBasisModel,
    mu: ParameterPoint,
    theta: &[f64],
    tol_degeneracy: f64,
) -> Result<ReducedSolution> {
    let n = rbm.basis_size();
    let (vals, vecs) = reduced_eigpairs(rbm, theta)?;
    let m = vals
        .iter()
        .take_while(|&&v| v - vals[0] <= tol_degeneracy)
        .count();
    let gap_rb = if m < n {
        vals[m] - vals[0]
    } else {
        f64::INFINITY
    };
    Ok(ReducedSolution {
        mu,
        lambda_rb: vals[0],
        phi: vecs.columns(0, m).into_owned(),
        ritz_values: vals[..m].to_vec(),
        gap_rb,
    })
}

/// Reduced ground solve at a parameter point, using the model's own theta
/// evaluator and degeneracy tolerance.
pub fn reduced_ground(
    rbm: &ReducedBasisModel,
    mu: &ParameterPoint,
    tol_degeneracy: f64,
) -> Result<ReducedSolution> {
    let theta = rbm.theta(mu)?;
    reduced_ground_with_theta(rbm, mu.clone(), &theta, tol_degeneracy)
}

/// Manifold-averaged observable value at one output index (momentum).
/// The imaginary remainder of the coefficient contraction is checked
/// against `1e-10` of the value scale.
pub fn observable_eval(
    rbm: &ReducedBasisModel,
    sol: &ReducedSolution,
    observable: usize,
    output: usize,
) -> Result<f64> {
    let (values, imag_max) = observable_curve(rbm, sol, observable)?;
    let v = values.get(output).copied().ok_or(Error::DimensionMismatch {
        context: "observable output index",
        expected: values.len(),
        found: output,
    })?;
    debug_assert!(imag_max <= 1e-10 * (1.0 + v.abs()));
    Ok(v)
}

/// Full momentum-resolved curve `p -> O(mu; p)` for one observable;
/// returns the real values and the largest imaginary remainder.
pub fn observable_curve(
    rbm: &ReducedBasisModel,
    sol: &ReducedSolution,
    observable: usize,
) -> Result<(Vec<f64>, f64)> {
    let obs = rbm
        .observables()
        .get(observable)
        .ok_or(Error::MissingBlocks {
            what: "reduced observable blocks",
        })?;
    let g = obs.groups();
    let m = sol.degeneracy().max(1) as f64;
    let mut table = DMatrix::zeros(g, g);
    for a in 0..g {
        for b in 0..g {
            let block = &obs.pair_blocks[a * g + b];
            let mut acc = 0.0;
            for i in 0..sol.degeneracy() {
                acc += sol.phi.column(i).dot(&(block * sol.phi.column(i)));
            }
            table[(a, b)] = acc / m;
        }
    }
    Ok(obs.meta.contract(&table))
}

/// Full-space Ritz vectors `B phi` (linear in the Hilbert dimension).
pub fn lift(rbm: &ReducedBasisModel, sol: &ReducedSolution) -> Result<DMatrix<f64>> {
    rbm.lift(sol)
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Evaluate the occupation profile of the lifted manifold (needs the
    /// stored basis).
    pub occupation: bool,
    /// Momentum indices to report; None = all outputs.
    pub momenta: Option<Vec<usize>>,
    /// Which observable to evaluate.
    pub observable: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            occupation: true,
            momenta: None,
            observable: 0,
        }
    }
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub index: usize,
    pub mu: ParameterPoint,
    pub lambda_rb: f64,
    pub degeneracy: usize,
    pub gap_rb: f64,
    pub residual: f64,
    pub occupation: Option<f64>,
    /// Structure-factor values at the selected momenta.
    pub structure_factor: Vec<f64>,
    pub imag_max: f64,
    /// Soft per-point diagnostics; scan continues on errors.
    pub flag: Option<String>,
}

/// Sweep a parameter grid with the surrogate. Rows come out in grid order;
/// per-point failures are recorded in the row flag and the scan continues.
pub fn scan(rbm: &ReducedBasisModel, grid: &ParameterGrid, opts: &ScanOptions) -> Result<Vec<ScanRow>> {
    if opts.observable >= rbm.observables().len() {
        return Err(Error::MissingBlocks {
            what: "reduced observable blocks for the requested observable",
        });
    }
    if opts.occupation && !rbm.has_basis() {
        return Err(Error::MissingBlocks {
            what: "basis block (saved with --no-store-basis?); disable the occupation column",
        });
    }
    let tol_deg = rbm.tol_degeneracy();
    let rows = crate::util::par_map_indexed(grid.len(), |i| {
        let mu = grid.point(i);
        match scan_point(rbm, mu.clone(), tol_deg, opts) {
            Ok(row) => ScanRow { index: i, ..row },
            Err(e) => ScanRow {
                index: i,
                mu,
                lambda_rb: f64::NAN,
                degeneracy: 0,
                gap_rb: f64::NAN,
                residual: f64::NAN,
                occupation: None,
                structure_factor: Vec::new(),
                imag_max: f64::NAN,
                flag: Some(e.to_string()),
            },
        }
    });
    Ok(rows)
}

fn scan_point(
    rbm: &ReducedBasisModel,
    mu: ParameterPoint,
    tol_deg: f64,
    opts: &ScanOptions,
) -> Result<ScanRow> {
    let theta = rbm.theta(&mu)?;
    let sol = reduced_ground_with_theta(rbm, mu.clone(), &theta, tol_deg)?;
    let res = residual_of(rbm, &theta, &sol)?;
    let (curve, imag_max) = observable_curve(rbm, &sol, opts.observable)?;
    let structure_factor = match &opts.momenta {
        Some(idx) => idx.iter().map(|&p| curve[p]).collect(),
        None => curve,
    };
    let occupation = if opts.occupation {
        Some(occupation_profile(&rbm.lift(&sol)?))
    } else {
        None
    };
    Ok(ScanRow {
        index: 0,
        mu,
        lambda_rb: sol.lambda_rb,
        degeneracy: sol.degeneracy(),
        gap_rb: sol.gap_rb,
        residual: res,
        occupation,
        structure_factor,
        imag_max,
        flag: None,
    })
}
