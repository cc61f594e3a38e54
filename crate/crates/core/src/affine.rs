//! Affine operator and observable families.
//!
//! A parametrized Hamiltonian is kept in affine-decomposed form
//! `H(mu) = sum_q theta_q(mu) H_q`: a small number of fixed Hermitian terms
//! plus scalar coefficient functions of the parameters. Observables follow
//! the same pattern with complex coefficients indexed by an output label
//! (here: a momentum), evaluated as averages over the ground manifold.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{DomainBox, ParameterPoint};
use crate::sparse::{SparseHermitian, SparseMatrix};

type ThetaFn = dyn Fn(&ParameterPoint) -> Vec<f64> + Send + Sync;

/// The family `H(mu) = sum_q theta_q(mu) H_q`.
pub struct AffineOperator {
    terms: Vec<SparseHermitian>,
    theta: Box<ThetaFn>,
    domain: DomainBox,
}

impl AffineOperator {
    pub fn new(
        terms: Vec<SparseHermitian>,
        theta: Box<ThetaFn>,
        domain: DomainBox,
    ) -> Result<Self> {
        let dim = match terms.first() {
            Some(t) => t.dim(),
            None => {
                return Err(Error::Config(
                    "affine operator requires at least one term".into(),
                ))
            }
        };
        for t in &terms {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "affine operator terms",
                    expected: dim,
                    found: t.dim(),
                });
            }
        }
        Ok(Self {
            terms,
            theta,
            domain,
        })
    }

    /// Number of affine terms Q.
    pub fn q_terms(&self) -> usize {
        self.terms.len()
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    pub fn terms(&self) -> &[SparseHermitian] {
        &self.terms
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// Replace the admissible parameter box (e.g. to train on a sub-domain).
    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        self.domain = domain;
        self
    }

    /// Coefficients `theta_q(mu)`, checked to be finite and of length Q.
    pub fn theta(&self, mu: &ParameterPoint) -> Result<Vec<f64>> {
        self.domain.check_contains(mu)?;
        let theta = (self.theta)(mu);
        debug_assert_eq!(theta.len(), self.terms.len());
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite coefficient theta({mu}) = {theta:?}"
            )));
        }
        Ok(theta)
    }

    /// Assemble `H(mu)` as an explicit sparse Hermitian matrix.
    pub fn assemble(&self, mu: &ParameterPoint) -> Result<SparseHermitian> {
        let theta = self.theta(mu)?;
        let terms: Vec<(f64, &SparseHermitian)> =
            theta.iter().copied().zip(self.terms.iter()).collect();
        SparseHermitian::linear_combination(&terms)
    }
}

impl std::fmt::Debug for AffineOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineOperator")
            .field("q_terms", &self.q_terms())
            .field("dim", &self.dim())
            .field("domain", &self.domain)
            .finish()
    }
}

/// Positions, momenta and normalization defining the coefficients
/// `alpha_{g,g'}(k) = exp(-i (x_g - x_{g'}) . k) / norm` of a structure
/// factor. This is the part of an observable that survives into the reduced
/// model file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StructureFactorMeta {
    /// Real-space position of each operator group (site or unit cell).
    pub positions: Vec<[f64; 2]>,
    /// Momentum grid; one output index per entry.
    pub momenta: Vec<[f64; 2]>,
    /// Integer labels of the momenta on the reciprocal grid.
    pub momentum_labels: Vec<[usize; 2]>,
    /// Normalization divisor (number of sites or cells).
    pub norm: f64,
}

impl StructureFactorMeta {
    pub fn groups(&self) -> usize {
        self.positions.len()
    }

    pub fn outputs(&self) -> usize {
        self.momenta.len()
    }

    /// Coefficient vector over flattened pairs (g, g') for output index `p`.
    /// The parameters do not enter for structure factors; the argument keeps
    /// the evaluator signature uniform.
    pub fn alpha(&self, _mu: Option<&ParameterPoint>, p: usize) -> Vec<Complex64> {
        let g = self.groups();
        let k = self.momenta[p];
        let mut out = Vec::with_capacity(g * g);
        for a in 0..g {
            for b in 0..g {
                let dx = self.positions[a][0] - self.positions[b][0];
                let dy = self.positions[a][1] - self.positions[b][1];
                let phase = -(dx * k[0] + dy * k[1]);
                out.push(Complex64::new(phase.cos(), phase.sin()) / self.norm);
            }
        }
        out
    }

    /// Contract a real symmetric pair table `x[g][g']` with alpha for every
    /// output index. Returns the real parts and the largest imaginary
    /// remainder seen across outputs.
    pub fn contract(&self, pair_table: &DMatrix<f64>) -> (Vec<f64>, f64) {
        let g = self.groups();
        assert_eq!(pair_table.nrows(), g);
        let mut values = Vec::with_capacity(self.outputs());
        let mut max_imag: f64 = 0.0;
        for p in 0..self.outputs() {
            let alpha = self.alpha(None, p);
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..g {
                for b in 0..g {
                    acc += alpha[a * g + b] * pair_table[(a, b)];
                }
            }
            max_imag = max_imag.max(acc.im.abs());
            values.push(acc.re);
        }
        (values, max_imag)
    }
}

/// Affine-decomposable observable, stored in grouped one-sided form: the
/// full terms `O_{g,g'} = sum_c F_{g,c}^dagger F_{g',c}` are never
/// materialized; expectation tables are built from the factor applications.
pub struct AffineObservable {
    label: String,
    /// `factors[g][c]`: component c of group g (real matrices; symmetric or
    /// antisymmetric, both handled by the transpose-free contraction).
    factors: Vec<Vec<SparseMatrix>>,
    meta: StructureFactorMeta,
}

impl AffineObservable {
    pub fn new(
        label: impl Into<String>,
        factors: Vec<Vec<SparseMatrix>>,
        meta: StructureFactorMeta,
    ) -> Result<Self> {
        if factors.is_empty() || factors.len() != meta.groups() {
            return Err(Error::Config(
                "observable factor groups must match the position list".into(),
            ));
        }
        let components = factors[0].len();
        let dim = factors[0][0].rows();
        for group in &factors {
            if group.len() != components {
                return Err(Error::Config(
                    "observable groups must share the component count".into(),
                ));
            }
            for f in group {
                if f.rows() != dim || f.cols() != dim {
                    return Err(Error::DimensionMismatch {
                        context: "observable factors",
                        expected: dim,
                        found: f.rows(),
                    });
                }
            }
        }
        Ok(Self {
            label: label.into(),
            factors,
            meta,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.factors[0][0].rows()
    }

    pub fn groups(&self) -> usize {
        self.factors.len()
    }

    pub fn components(&self) -> usize {
        self.factors[0].len()
    }

    pub fn outputs(&self) -> usize {
        self.meta.outputs()
    }

    pub fn meta(&self) -> &StructureFactorMeta {
        &self.meta
    }

    pub fn factor(&self, group: usize, component: usize) -> &SparseMatrix {
        &self.factors[group][component]
    }

    /// Pair expectation table `x[g][g'] = (1/m) sum_i <psi_i| O_{g,g'} |psi_i>`
    /// on an orthonormal manifold block, computed through the one-sided
    /// factors in O(G * C * nnz * m) plus small Gram products.
    pub fn pair_table(&self, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if states.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "observable evaluation",
                expected: self.dim(),
                found: states.nrows(),
            });
        }
        let g = self.groups();
        let c = self.components();
        let m = states.ncols().max(1);
        let mut table = DMatrix::zeros(g, g);
        for comp in 0..c {
            let applied: Vec<DMatrix<f64>> = crate::util::par_map_indexed(g, |grp| {
                self.factors[grp][comp]
                    .apply_block(states)
                    .expect("dimension already checked")
            });
            for a in 0..g {
                for b in a..g {
                    let mut acc = 0.0;
                    for i in 0..states.ncols() {
                        acc += applied[a].column(i).dot(&applied[b].column(i));
                    }
                    acc /= m as f64;
                    table[(a, b)] += acc;
                    if b != a {
                        table[(b, a)] += acc;
                    }
                }
            }
        }
        Ok(table)
    }

    /// Structure-factor curve over all outputs for a manifold block.
    /// Returns values and the largest imaginary remainder.
    pub fn evaluate_manifold(&self, states: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
        let table = self.pair_table(states)?;
        Ok(self.meta.contract(&table))
    }
}

impl std::fmt::Debug for AffineObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineObservable")
            .field("label", &self.label)
            .field("groups", &self.groups())
            .field("components", &self.components())
            .field("outputs", &self.outputs())
            .finish()
    }
}
