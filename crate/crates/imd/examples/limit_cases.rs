//! The limiting exponents: p = 1, p -> infinity.
//!
//! Three structural facts frame the design family on any domain:
//!
//! * at p = 1 the split-cost and summed-cost methods are the same problem,
//! * as p -> infinity the split-cost design flattens to the uniform plate
//!   `2k = 2mu = E0` (the cost constraint stops distinguishing layouts),
//! * the summed-cost design instead keeps a pointwise budget partition
//!   `2k + 4mu = E0` while letting the split vary with the local stress.
//!
//! This example demonstrates all three on a small clamped rectangle.
//!
//! Run with: `cargo run --release --example limit_cases`

use imd::geometry::{generate_rect_mesh, ElementKind};
use imd::nullspace::decompose;
use imd::objective::{ExponentParams, MethodTag, Objective, SmoothingParams};
use imd::optimizer::{minimize, OptimizerConfig};
use imd::recovery::finish_solve;
use imd::statics::{assemble, BoundaryConditions, TriangleRule};

const E0: f64 = 216_554.0;

fn solve(
    mesh: &imd::geometry::Mesh,
    system: &imd::statics::StaticsSystem,
    rep: &imd::nullspace::NullSpaceRep,
    method: MethodTag,
    p: f64,
) -> imd::recovery::SolveResult {
    let params = ExponentParams::new(p).unwrap();
    let t0_inf = rep.t0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let smoothing = SmoothingParams::with_relative(method, &params, t0_inf, 1e-6);
    let objective = Objective::new(&system.cache, mesh, rep, method, params, smoothing).unwrap();
    let config = OptimizerConfig {
        ftol: 1e-12,
        max_iters: 200_000,
        ..OptimizerConfig::default()
    };
    let (alpha, report) = minimize(
        |a, g| objective.value_and_grad_or_value(a, g),
        &vec![0.0; objective.num_design_dofs()],
        &config,
    )
    .expect("minimization");
    finish_solve(&objective, alpha, report, E0).expect("recovery")
}

fn main() {
    let mesh = generate_rect_mesh(2.0, 1.0, 12, 6, ElementKind::Quad4).expect("mesh");
    let bc = BoundaryConditions {
        support_tags: vec!["left".into()],
        tractions: vec![("right".into(), [5.0, -5.0])],
        point_forces: vec![],
    };
    let system = assemble(&mesh, &bc, TriangleRule::ThreePoint).expect("equilibrium system");
    let rep = decompose(&system, 1e-10).expect("null space");

    // p = 1: one problem, two names.
    let vp1 = solve(&mesh, &system, &rep, MethodTag::Vp, 1.0);
    let sp1 = solve(&mesh, &system, &rep, MethodTag::Sp, 1.0);
    println!("p = 1:");
    println!("  split-cost compliance  {:.12e} N*m", vp1.compliance);
    println!("  summed-cost compliance {:.12e} N*m", sp1.compliance);
    println!(
        "  the methods coincide (rel diff {:.1e})\n",
        (vp1.compliance - sp1.compliance).abs() / vp1.compliance
    );

    // Split cost at huge p: the design flattens to the uniform plate.
    let vp_inf = solve(&mesh, &system, &rep, MethodTag::Vp, 1e6);
    let max_dev = vp_inf
        .moduli
        .at_qps
        .iter()
        .filter(|s| !s.void)
        .map(|s| {
            ((2.0 * s.k - E0).abs() / E0).max((2.0 * s.mu - E0).abs() / E0)
        })
        .fold(0.0, f64::max);
    println!("split cost, p = 1e6:");
    println!("  compliance {:.9e} N*m", vp_inf.compliance);
    println!("  max |2k - E0|/E0, |2mu - E0|/E0 over loaded points: {max_dev:.2e}");
    println!("  — the uniform plate 2k = 2mu = E0 in all but name\n");

    // Summed cost at large p: a pointwise partition of the budget.
    let sp100 = solve(&mesh, &system, &rep, MethodTag::Sp, 100.0);
    let weights: Vec<f64> = system.cache.points.iter().map(|q| q.w_detj).collect();
    let total: f64 = weights.iter().sum();
    let mean_dev: f64 = sp100
        .moduli
        .at_qps
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * (2.0 * s.k + 4.0 * s.mu - E0).abs() / E0)
        .sum::<f64>()
        / total;
    let (k_min, k_max) = sp100
        .moduli
        .at_qps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.k), hi.max(s.k))
        });
    println!("summed cost, p = 100:");
    println!("  compliance {:.9e} N*m", sp100.compliance);
    println!("  mean |2k + 4mu - E0|/E0: {mean_dev:.2e}");
    println!("  bulk modulus spans [{k_min:.0}, {k_max:.0}] N/m while the sum stays pinned");
}
