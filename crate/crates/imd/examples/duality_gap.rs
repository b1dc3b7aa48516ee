//! Certifying a design solve with a duality bound.
//!
//! Any kinematically admissible displacement field yields a rigorous lower
//! bound on the minimal stress functional — an unconditional sanity check
//! on the optimizer: no converged value may ever fall below the bound.
//! This example uses the displacement of a homogeneous unit-stiffness
//! plate, amplitude-optimized in closed form, on a small clamped
//! rectangle. One fixed displacement shape cannot be tight for every
//! exponent (its strain concentrations are amplified by the conjugate
//! power r'), so the printed gaps are sizable; what matters is that the
//! inequality holds with no slack tricks.
//!
//! Run with: `cargo run --release --example duality_gap`

use imd::geometry::{generate_rect_mesh, ElementKind};
use imd::nullspace::decompose;
use imd::objective::{ExponentParams, MethodTag, Objective, SmoothingParams};
use imd::optimizer::{minimize, OptimizerConfig};
use imd::statics::{assemble, BoundaryConditions, TriangleRule};
use imd::verify::{best_scaled_dual, homogeneous_candidate};

fn main() {
    let mesh = generate_rect_mesh(2.0, 1.0, 16, 8, ElementKind::Quad4).expect("mesh");
    let bc = BoundaryConditions {
        support_tags: vec!["left".into()],
        tractions: vec![("right".into(), [5.0, -5.0])],
        point_forces: vec![],
    };
    let system = assemble(&mesh, &bc, TriangleRule::ThreePoint).expect("equilibrium system");
    let rep = decompose(&system, 1e-10).expect("null space");
    println!(
        "mesh: {} nodes, equilibrium rank {}, null-space dimension {}",
        mesh.num_nodes(),
        rep.rank,
        rep.nullity
    );

    // One dual certificate serves every method and exponent.
    let candidate = homogeneous_candidate(&mesh, &system).expect("homogeneous-plate candidate");

    for method in [MethodTag::Vp, MethodTag::Sp] {
        for p in [2.0, 3.0] {
            let params = ExponentParams::new(p).unwrap();
            let t0_inf = rep.t0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let smoothing = SmoothingParams::with_relative(method, &params, t0_inf, 1e-6);
            let objective =
                Objective::new(&system.cache, &mesh, &rep, method, params, smoothing).unwrap();
            let config = OptimizerConfig {
                ftol: 1e-12,
                max_iters: 100_000,
                ..OptimizerConfig::default()
            };
            let (alpha, report) = minimize(
                |a, g| objective.value_and_grad_or_value(a, g),
                &vec![0.0; objective.num_design_dofs()],
                &config,
            )
            .expect("minimization");
            let exact = Objective {
                smoothing: SmoothingParams::none(),
                ..objective
            };
            let primal = exact.value(&alpha);

            let dual = best_scaled_dual(&candidate, method, &params, &mesh, &system)
                .expect("scaled dual value");
            let gap = 1.0 - dual.value / primal;
            println!(
                "{} p={p}: primal {:.9e}  dual bound {:.9e}  rel gap {:.2e}  ({} iters)",
                method.name(),
                primal,
                dual.value,
                gap,
                report.iterations
            );
            assert!(dual.value <= primal * (1.0 + 1e-9), "weak duality violated");
        }
    }
    println!("all dual bounds lie below the primal values, as they must");
}
