//! Runs the projected-gradient solver with a recorded trace and prints it
//! as CSV, next to the lattice search for comparison.
//!
//! cargo run --example solver_trace > trace.csv

use hybridloc::model::{Axis, AxisEstimateMatrix};
use hybridloc::penalty::PowerPenalty;
use hybridloc::solver::{solve_gpm, solve_oracle, AxisObjective, SolverConfig};

fn main() -> hybridloc::Result<()> {
    let u = AxisEstimateMatrix::from_rows(Axis::X, &[vec![0.1, 0.4], vec![1.1, 0.6]], &[0.0, 1.0])?;
    let obj = AxisObjective::new(u, PowerPenalty::mse());
    let cfg = SolverConfig { record_trace: true, ..Default::default() };
    let (alpha, trace) = solve_gpm(&obj, &cfg)?;
    trace.write_csv(std::io::stdout())?;

    let lattice = solve_oracle(&obj, 1e-3)?;
    eprintln!(
        "{} iterations ({:?}), beta {:.4}, q {:.4}, bound {:?}",
        trace.iterations, trace.stop_reason, trace.beta, trace.q, trace.k_bound
    );
    eprintln!("solver  alpha {:?}  f {:.6}", alpha.as_slice(), trace.final_objective());
    eprintln!("lattice alpha {:?}  f {:.6}", lattice.as_slice(), obj.objective(&lattice)?);
    Ok(())
}
