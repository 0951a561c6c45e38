//! Grid-convergence study on a manufactured smooth solution.
//!
//! Solves the source-augmented Euler equations on nested meshes and prints
//! the observed L2 convergence orders for all four schemes.

use foilopt::disc::Scheme;
use foilopt::solver::SolverConfig;
use foilopt::verification::{observed_orders, order_study};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases: [(Scheme, &[usize]); 4] = [
        (Scheme::Fv1, &[16, 32, 64]),
        (Scheme::Fv2, &[16, 32, 64]),
        (Scheme::DgP1, &[8, 16, 32]),
        (Scheme::DgP2, &[8, 16, 32]),
    ];
    for (scheme, sizes) in cases {
        let mut cfg = SolverConfig::new(scheme);
        cfg.tol_rel = 1e-11;
        cfg.max_steps = 400;
        let t0 = std::time::Instant::now();
        let rows = order_study(scheme, sizes, &cfg)?;
        let orders = observed_orders(&rows);
        print!("{:5}", scheme.name());
        for r in &rows {
            print!("  n={:3} err={:.4e}", r.cells_per_side, r.l2_error);
        }
        println!("  orders: {:?}  ({:.1}s)", orders.iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>(), t0.elapsed().as_secs_f64());
    }
    Ok(())
}
