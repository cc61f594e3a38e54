//! Antiferromagnetic spin-1/2 triangles on a periodic square lattice of
//! three-site unit cells (trimers).
//!
//! The four affine terms are the three intra-trimer Heisenberg bonds (one
//! per coupling ratio, the third bond carrying the unit of energy) and the
//! inter-trimer bond sum with periodic wrap in both directions:
//! theta = (J1/J3, J2/J3, 1, J'/J3).

use crate::affine::{AffineObservable, AffineOperator};
use crate::error::Result;
use crate::model::{
    heisenberg_bond, lift_site_general, sf_meta, spin_x, spin_y_real, spin_z, LatticeSpec,
    ModelSpec,
};
use crate::sparse::{SparseHermitian, SparseMatrix};

/// 1-based site index of basis atom `alpha` (0..3) in cell (cx, cy).
fn site(nx: usize, cx: usize, cy: usize, alpha: usize) -> usize {
    3 * (cy * nx + cx) + alpha + 1
}

/// Build the Q = 4 affine terms and the lattice geometry.
pub fn build_triangle(nx: usize, ny: usize) -> Result<(AffineOperator, LatticeSpec)> {
    let lattice = LatticeSpec::triangle_lattice(nx, ny)?;
    let n_sites = lattice.n_sites();

    let mut intra: Vec<Vec<(usize, usize)>> = vec![Vec::new(); 3];
    let mut inter: Vec<(usize, usize)> = Vec::new();
    for cy in 0..ny {
        for cx in 0..nx {
            let s = |alpha| site(nx, cx, cy, alpha);
            intra[0].push((s(0), s(1)));
            intra[1].push((s(1), s(2)));
            intra[2].push((s(2), s(0)));
            let xp = (cx + 1) % nx;
            let yp = (cy + 1) % ny;
            inter.push((s(2), site(nx, xp, cy, 0)));
            inter.push((s(1), site(nx, cx, yp, 0)));
            inter.push((s(1), site(nx, cx, yp, 2)));
        }
    }

    let bond_sum = |bonds: &[(usize, usize)]| -> Result<SparseHermitian> {
        let mats: Vec<SparseHermitian> = bonds
            .iter()
            .map(|&(a, b)| heisenberg_bond(a, b, n_sites))
            .collect::<Result<_>>()?;
        let weighted: Vec<(f64, &SparseHermitian)> = mats.iter().map(|m| (1.0, m)).collect();
        SparseHermitian::linear_combination(&weighted)
    };

    let terms = vec![
        bond_sum(&intra[0])?,
        bond_sum(&intra[1])?,
        bond_sum(&intra[2])?,
        bond_sum(&inter)?,
    ];

    let spec = ModelSpec::TriangleLattice { nx, ny };
    let op = AffineOperator::new(
        terms,
        Box::new(move |mu| spec.theta(mu).expect("dimension checked by caller")),
        spec.default_domain(),
    )?;
    Ok((op, lattice))
}

/// Trimer-total-spin structure factor
/// `S(k) = (1/(Nx Ny)) sum_{R,R'} exp(-i (R - R') . k) <Sbar_R . Sbar_R'>`,
/// with one group per unit cell and three real one-sided components: the
/// summed S^x, the antisymmetric spin-y proxy, and the diagonal S^z.
pub fn triangle_structure_factor(nx: usize, ny: usize) -> Result<AffineObservable> {
    let lattice = LatticeSpec::triangle_lattice(nx, ny)?;
    let n_sites = lattice.n_sites();
    let locals = [spin_x(), spin_y_real(), spin_z()];

    let mut factors: Vec<Vec<SparseMatrix>> = Vec::with_capacity(nx * ny);
    let mut positions = Vec::with_capacity(nx * ny);
    for cy in 0..ny {
        for cx in 0..nx {
            let mut comps = Vec::with_capacity(3);
            for local in &locals {
                let lifted: Vec<SparseMatrix> = (0..3)
                    .map(|alpha| lift_site_general(local, site(nx, cx, cy, alpha), n_sites))
                    .collect::<Result<_>>()?;
                let weighted: Vec<(f64, &SparseMatrix)> =
                    lifted.iter().map(|m| (1.0, m)).collect();
                comps.push(SparseMatrix::linear_combination(&weighted)?);
            }
            factors.push(comps);
            positions.push([cx as f64, cy as f64]);
        }
    }
    let meta = sf_meta(positions, &lattice.momentum_grid(), (nx * ny) as f64);
    AffineObservable::new("trimer-structure-factor", factors, meta)
}
