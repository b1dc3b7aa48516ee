//! The cost-allocation lemma behind both design methods, in isolation.
//!
//! Distributing a stiffness budget over a few cells to minimize a summed
//! `demand / allocation` energy has a closed-form optimum for both budget
//! shapes: the component-wise p-mean (split cost) and the p-mean of the
//! per-cell sums (summed cost). This example evaluates the closed forms on
//! a small two-cell instance, cross-checks them against a brute-force grid
//! search, and shows that the returned minimizers spend the budget exactly.
//!
//! Run with: `cargo run --release --example lemma_closed_forms`

use imd::objective::MethodTag;
use imd::verify::{brute_force_oracle, lemma_split, lemma_sum, CellField};

fn main() {
    // Two cells with different measures and demand pairs.
    let field = CellField {
        cells: vec![(0.6, vec![4.0, 1.0]), (1.4, vec![0.25, 2.25])],
    };
    let lambda = 2.0;

    println!("cells (measure, demands): {:?}", field.cells);
    println!("budget lambda = {lambda}\n");

    for p in [1.0, 2.0, 3.0, 10.0] {
        println!("p = {p}");
        for method in [MethodTag::Vp, MethodTag::Sp] {
            let solution = match method {
                MethodTag::Vp => lemma_split(&field, p, lambda),
                MethodTag::Sp => lemma_sum(&field, p, lambda),
            }
            .expect("closed-form solution");
            let grid =
                brute_force_oracle(&field, p, lambda, method, 2000).expect("grid search");

            // How much of the budget the minimizer consumes.
            let spent = match method {
                MethodTag::Vp => field
                    .cells
                    .iter()
                    .zip(&solution.minimizer)
                    .map(|((m, _), u)| m * u.iter().map(|ui| ui.powf(p)).sum::<f64>())
                    .sum::<f64>(),
                MethodTag::Sp => field
                    .cells
                    .iter()
                    .zip(&solution.minimizer)
                    .map(|((m, _), u)| m * u.iter().sum::<f64>().powf(p))
                    .sum::<f64>(),
            };

            println!(
                "  {}: value {:.9}  grid {:.9}  (rel dev {:.1e})",
                method.name(),
                solution.value,
                grid,
                (grid - solution.value).abs() / solution.value
            );
            println!(
                "      minimizer {:?}  budget spent {:.12} of {:.12}",
                solution
                    .minimizer
                    .iter()
                    .map(|u| u.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
                spent,
                lambda.powf(p)
            );
        }
    }
}
