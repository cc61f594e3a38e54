use spinrb_core::model::{build_triangle, triangle_structure_factor, ModelSpec};
use spinrb_core::offline::{greedy_train, GreedyConfig};
use spinrb_core::params::{ParameterGrid, ParameterPoint};
use spinrb_core::truth::{TruthConfig, TruthSolver};
use std::time::Instant;

fn main() {
    let (op, _) = build_triangle(2, 2).unwrap();
    let obs = triangle_structure_factor(2, 2).unwrap();
    let mu_stress = ParameterPoint::from([0.8, 0.8, 0.01]);
    let truth_cfg = TruthConfig { tol_degeneracy: 1e-3, ..TruthConfig::default() };
    let solver = TruthSolver::new(truth_cfg.clone());
    let h = op.assemble(&mu_stress).unwrap();
    let t0 = Instant::now();
    let m = solver.solve(&h, &mu_stress, None).unwrap();
    println!("truth at stress: m={} gap={:.3e} its={} rounds={} ({:?})", m.degeneracy(), m.gap, m.info.iterations, m.info.adapt_rounds, t0.elapsed());

    let grid = ParameterGrid::uniform(op.domain(), &[11, 11, 10]).unwrap();
    let mut cfg = GreedyConfig::new(grid, mu_stress.clone());
    cfg.tol = 1e-6;
    cfg.max_truth_solves = 24;
    cfg.truth = truth_cfg;
    let out = greedy_train(&op, Some(ModelSpec::TriangleLattice { nx: 2, ny: 2 }), std::slice::from_ref(&obs), &cfg, |r| {
        eprintln!("iter {} N {} m {} res {:.3e} mu {} fallback {}", r.iteration, r.basis_size, r.degeneracy, r.max_residual, r.mu, r.fallback);
    }).unwrap();
    println!("abort: {:?}", out.abort);
}
