//! Solve the chain-relaxed dual of a small random grid MRF and print the
//! certified lower bound next to the decoded labeling's energy.
//!
//! Run with: `cargo run --release --example grid_dual_bound`

use fw_saddle::appa::{
    appa_init, appa_iterate, ergodic_primal, eval_dual, AppaOptions, EpsSchedule, TSchedule,
};
use fw_saddle::mrf::{build_saddle, decode_primal, GridMrf, PairwisePotential};
use fw_saddle::problem::DenseVector;

fn main() -> Result<(), fw_saddle::Error> {
    // 5x4 grid, 3 labels, truncated linear smoothing term
    let (w, h, l) = (5usize, 4usize, 3usize);
    let mut lcg: u64 = 0x853c49e6748fea9b;
    let unary: Vec<f64> = (0..w * h * l)
        .map(|_| {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((lcg >> 33) % 1000) as f64 / 1000.0
        })
        .collect();
    let pairwise = PairwisePotential {
        kind: fw_saddle::mrf::PairwiseKind::TruncatedLinear,
        weight: 0.4,
        truncation: 2.0,
    };
    let mrf = GridMrf::new(w, h, l, unary, pairwise)?;
    let saddle = build_saddle(mrf);

    let opts = AppaOptions::new(0.05, TSchedule::Aggressive, EpsSchedule::power(3.0));
    let mut state = appa_init(&saddle.problem, &opts)?;
    for n in 1..=120u64 {
        appa_iterate(&mut state, &saddle.problem, &opts)?;
        if n % 20 == 0 {
            let (dual, _) = eval_dual(&saddle.problem, &state.y)?;
            let x_erg: DenseVector = ergodic_primal(&state);
            let (_, energy) = decode_primal(&x_erg, &saddle.mrf, &saddle.layout);
            println!(
                "n = {n:3}  dual bound = {dual:.6}  decoded energy = {energy:.6}  lmo calls = {}",
                saddle.problem.lmo.calls()
            );
        }
    }
    let (dual, _) = eval_dual(&saddle.problem, &state.y)?;
    let (labeling, energy) = decode_primal(
        &ergodic_primal(&state),
        &saddle.mrf,
        &saddle.layout,
    );
    println!("final: bound {dual:.6} <= optimum <= {energy:.6}");
    println!("labeling: {labeling:?}");
    Ok(())
}
