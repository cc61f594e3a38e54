//! Concrete lattice models: builders for the benchmark Hamiltonians and
//! their structure-factor observables.
//!
//! Canonical basis convention: site `r` (1-based) maps to bit `r - 1` of the
//! basis-state index; a set bit means excited / spin-up. Diagonal operators
//! are then O(N) bit-mask evaluations.

mod rydberg;
mod triangle;

pub use rydberg::{build_rydberg, rydberg_structure_factor};
pub use triangle::{build_triangle, triangle_structure_factor};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affine::{AffineObservable, AffineOperator, StructureFactorMeta};
use crate::error::{Error, Result};
use crate::params::{DomainBox, ParameterPoint};
use crate::sparse::{CooBuilder, SparseHermitian, SparseMatrix};

/// Which benchmark system a model file or run configuration refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    RydbergChain { nx: usize },
    TriangleLattice { nx: usize, ny: usize },
}

impl ModelSpec {
    pub fn parameter_dim(&self) -> usize {
        match self {
            ModelSpec::RydbergChain { .. } => 2,
            ModelSpec::TriangleLattice { .. } => 3,
        }
    }

    pub fn q_terms(&self) -> usize {
        match self {
            ModelSpec::RydbergChain { .. } => 3,
            ModelSpec::TriangleLattice { .. } => 4,
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        match *self {
            ModelSpec::RydbergChain { nx } => LatticeSpec::rydberg_chain(nx),
            ModelSpec::TriangleLattice { nx, ny } => LatticeSpec::triangle_lattice(nx, ny),
        }
    }

    pub fn default_domain(&self) -> DomainBox {
        match self {
            ModelSpec::RydbergChain { .. } => {
                DomainBox::new(vec![0.0, 0.5], vec![5.0, 4.0]).unwrap()
            }
            ModelSpec::TriangleLattice { .. } => {
                DomainBox::new(vec![0.0, 0.0, 0.01], vec![2.0, 2.0, 0.1]).unwrap()
            }
        }
    }

    /// Affine coefficients; evaluable without building any matrices, so a
    /// loaded reduced model never touches the Hilbert-space dimension.
    pub fn theta(&self, mu: &ParameterPoint) -> Result<Vec<f64>> {
        if mu.dim() != self.parameter_dim() {
            return Err(Error::DimensionMismatch {
                context: "parameter point",
                expected: self.parameter_dim(),
                found: mu.dim(),
            });
        }
        Ok(match self {
            ModelSpec::RydbergChain { .. } => vec![1.0, -mu[0], mu[1].powi(6)],
            ModelSpec::TriangleLattice { .. } => vec![mu[0], mu[1], 1.0, mu[2]],
        })
    }

    /// Build the Hamiltonian family with the default domain.
    pub fn operator(&self) -> Result<AffineOperator> {
        match *self {
            ModelSpec::RydbergChain { nx } => Ok(build_rydberg(nx)?.0),
            ModelSpec::TriangleLattice { nx, ny } => Ok(build_triangle(nx, ny)?.0),
        }
    }

    pub fn observable(&self) -> Result<AffineObservable> {
        match *self {
            ModelSpec::RydbergChain { nx } => rydberg_structure_factor(nx),
            ModelSpec::TriangleLattice { nx, ny } => triangle_structure_factor(nx, ny),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::RydbergChain { nx } => format!("rydberg-chain nx={nx}"),
            ModelSpec::TriangleLattice { nx, ny } => format!("triangle-lattice {nx}x{ny}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeKind {
    RydbergChain,
    TriangleLattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Geometry of a concrete lattice instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    pub nx: usize,
    pub ny: usize,
    pub sites_per_cell: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn rydberg_chain(nx: usize) -> Result<Self> {
        if nx < 2 {
            return Err(Error::Config(format!(
                "Rydberg chain needs nx >= 2 sites, got {nx}"
            )));
        }
        Ok(Self {
            kind: LatticeKind::RydbergChain,
            nx,
            ny: 1,
            sites_per_cell: 1,
            boundary: Boundary::Open,
        })
    }

    pub fn triangle_lattice(nx: usize, ny: usize) -> Result<Self> {
        if nx < 1 || ny < 1 {
            return Err(Error::Config(format!(
                "triangle lattice needs nx, ny >= 1, got {nx}x{ny}"
            )));
        }
        Ok(Self {
            kind: LatticeKind::TriangleLattice,
            nx,
            ny,
            sites_per_cell: 3,
            boundary: Boundary::Periodic,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.nx * self.ny * self.sites_per_cell
    }

    /// Hilbert-space dimension 2^n_sites.
    pub fn hilbert_dim(&self) -> usize {
        1usize << self.n_sites()
    }

    pub fn momentum_grid(&self) -> MomentumGrid {
        match self.kind {
            LatticeKind::RydbergChain => MomentumGrid::chain(self.nx),
            LatticeKind::TriangleLattice => MomentumGrid::lattice(self.nx, self.ny),
        }
    }
}

/// Momenta commensurate with the lattice: `k = 2 pi m / N` per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    points: Vec<[f64; 2]>,
    labels: Vec<[usize; 2]>,
}

impl MomentumGrid {
    pub fn chain(nx: usize) -> Self {
        let tau = std::f64::consts::TAU;
        let points = (0..nx).map(|m| [tau * m as f64 / nx as f64, 0.0]).collect();
        let labels = (0..nx).map(|m| [m, 0]).collect();
        Self { points, labels }
    }

    pub fn lattice(nx: usize, ny: usize) -> Self {
        let tau = std::f64::consts::TAU;
        let mut points = Vec::with_capacity(nx * ny);
        let mut labels = Vec::with_capacity(nx * ny);
        for mx in 0..nx {
            for my in 0..ny {
                points.push([tau * mx as f64 / nx as f64, tau * my as f64 / ny as f64]);
                labels.push([mx, my]);
            }
        }
        Self { points, labels }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn labels(&self) -> &[[usize; 2]] {
        &self.labels
    }
}

// Single-site operator matrices in the (unset, set) = (ground, excited)
// ordering; spin-up is the set bit.

/// sigma^x.
pub fn pauli_x() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

/// Rydberg excitation-number operator, diag(0, 1).
pub fn number_op() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])
}

/// S^x = sigma^x / 2.
pub fn spin_x() -> DMatrix<f64> {
    0.5 * pauli_x()
}

/// S^z = sigma^z / 2 = diag(-1/2, +1/2) in bit order.
pub fn spin_z() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5])
}

/// Real antisymmetric proxy K = -i S^y; products over distinct sites satisfy
/// S^y_a S^y_b = K_a^T K_b contraction-wise, keeping all arithmetic real.
pub fn spin_y_real() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0])
}

/// Lift a d-by-d single-site operator to the full Hilbert space: identity on
/// every site except `site` (1-based). Sparse by construction; no dense
/// Kronecker product is ever materialized. Requires a Hermitian input.
pub fn lift_site_operator(
    local: &DMatrix<f64>,
    site: usize,
    n_sites: usize,
) -> Result<SparseHermitian> {
    let d = local.nrows();
    for i in 0..d {
        for j in 0..d {
            if local[(i, j)] != local[(j, i)] {
                return Err(Error::NotHermitian {
                    row: i,
                    col: j,
                    value: local[(i, j)],
                });
            }
        }
    }
    Ok(SparseHermitian::new_unchecked(lift_site_general(
        local, site, n_sites,
    )?))
}

/// Lifting without the Hermiticity requirement (used for the antisymmetric
/// spin-y proxy in observable factors).
pub fn lift_site_general(
    local: &DMatrix<f64>,
    site: usize,
    n_sites: usize,
) -> Result<SparseMatrix> {
    let d = local.nrows();
    if local.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "site operator",
            expected: d,
            found: local.ncols(),
        });
    }
    if site == 0 || site > n_sites {
        return Err(Error::Config(format!(
            "site index {site} out of range 1..={n_sites}"
        )));
    }
    if d != 2 {
        // The bit-indexed fast path below assumes qubits; general d would
        // need mixed-radix digit arithmetic.
        return Err(Error::Config(format!(
            "only d=2 site operators are supported, got d={d}"
        )));
    }
    let dim = 1usize << n_sites;
    let mask = 1usize << (site - 1);
    let mut coo = CooBuilder::square(dim);
    for col in 0..dim {
        let l = usize::from(col & mask != 0);
        for lp in 0..2 {
            let v = local[(lp, l)];
            if v != 0.0 {
                let row = if lp == 1 { col | mask } else { col & !mask };
                coo.push(row, col, v);
            }
        }
    }
    Ok(coo.build())
}

/// Heisenberg exchange S_a . S_b between two distinct sites (1-based),
/// assembled directly from bit patterns: diagonal s_a s_b / 4 plus a 1/2
/// flip-flop between states whose bits differ.
pub fn heisenberg_bond(site_a: usize, site_b: usize, n_sites: usize) -> Result<SparseHermitian> {
    if site_a == site_b {
        return Err(Error::Config("Heisenberg bond needs distinct sites".into()));
    }
    for s in [site_a, site_b] {
        if s == 0 || s > n_sites {
            return Err(Error::Config(format!(
                "site index {s} out of range 1..={n_sites}"
            )));
        }
    }
    let dim = 1usize << n_sites;
    let (ma, mb) = (1usize << (site_a - 1), 1usize << (site_b - 1));
    let mut coo = CooBuilder::square(dim);
    for i in 0..dim {
        let (ba, bb) = (i & ma != 0, i & mb != 0);
        if ba == bb {
            coo.push(i, i, 0.25);
        } else {
            coo.push(i, i, -0.25);
            coo.push(i ^ (ma | mb), i, 0.5);
        }
    }
    Ok(SparseHermitian::new_unchecked(coo.build()))
}

/// Highest canonical-basis weight of a normalized manifold block: the
/// maximum over basis states of the manifold-averaged squared amplitude.
pub fn occupation_profile(states: &DMatrix<f64>) -> f64 {
    let m = states.ncols().max(1) as f64;
    (0..states.nrows())
        .map(|i| states.row(i).iter().map(|a| a * a).sum::<f64>() / m)
        .fold(0.0, f64::max)
}

/// Shared helper: structure-factor metadata for a set of group positions on
/// a momentum grid.
pub(crate) fn sf_meta(
    positions: Vec<[f64; 2]>,
    momenta: &MomentumGrid,
    norm: f64,
) -> StructureFactorMeta {
    StructureFactorMeta {
        positions,
        momenta: momenta.points().to_vec(),
        momentum_labels: momenta.labels().to_vec(),
        norm,
    }
}
