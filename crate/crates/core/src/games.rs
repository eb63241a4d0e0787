//! Bilinear matrix games `min_{x in Δ} max_{y in Δ} <Kx, y>` as saddle
//! problems, with an exact support-enumeration solver used as a test and
//! acceptance oracle.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fw::project_simplex;
use crate::linalg::{lu_solve, DenseMatrix};
use crate::problem::{
    DenseVector, LmoHandle, MatrixMap, ProxFn, SaddleProblem, SimplexPolytope, SmoothPart,
};

/// `h*(y) = δ_Δ(y)`: the prox is the simplex projection, the conjugate is
/// the max coordinate.
pub struct SimplexIndicator {
    pub dim: usize,
}

impl ProxFn for SimplexIndicator {
    fn prox(&self, _tau: f64, z: &DenseVector) -> DenseVector {
        project_simplex(z).expect("nonempty simplex")
    }

    fn value(&self, y: &DenseVector) -> f64 {
        let sum: f64 = y.as_slice().iter().sum();
        let tol = 1e-8;
        if (sum - 1.0).abs() <= tol && y.as_slice().iter().all(|&v| v >= -tol) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn domain_diameter(&self) -> Option<f64> {
        Some(if self.dim >= 2 {
            std::f64::consts::SQRT_2
        } else {
            0.0
        })
    }

    fn conjugate_value(&self, z: &DenseVector) -> Option<f64> {
        Some(z.as_slice().iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
    }
}

/// Assemble the saddle problem for a payoff matrix: the column player mixes
/// over `Δ^cols` (the lmo side), the row player over `Δ^rows` (the prox
/// side), `f = 0`.
pub fn build_matrix_game(payoff: DenseMatrix) -> SaddleProblem {
    let cols = payoff.cols();
    let rows = payoff.rows();
    SaddleProblem {
        k: Arc::new(MatrixMap::new(payoff)),
        f: Arc::new(SmoothPart::Linear {
            c: DenseVector::zeros(cols),
        }),
        lmo: LmoHandle::new(Arc::new(SimplexPolytope { dim: cols })),
        h_star: Arc::new(SimplexIndicator { dim: rows }),
        axb: None,
    }
}

/// An exact mixed equilibrium of a matrix game.
#[derive(Clone, Debug)]
pub struct GameSolution {
    pub x: DenseVector,
    pub y: DenseVector,
    pub value: f64,
}

/// Exact game value by support enumeration: for every square support pair,
/// solve the equalizing linear systems and keep the first pair that passes
/// feasibility and the deviation inequalities. Guarded to small games.
pub fn solve_matrix_game_exact(payoff: &DenseMatrix) -> Result<GameSolution> {
    let rows = payoff.rows();
    let cols = payoff.cols();
    if rows > 12 || cols > 12 {
        return Err(Error::InstanceTooLarge(format!(
            "{rows}x{cols} game exceeds the support-enumeration guard"
        )));
    }
    let tol = 1e-9;
    for k in 1..=rows.min(cols) {
        for rmask in subsets_of_size(rows, k) {
            let rsel = mask_indices(rmask, rows);
            for cmask in subsets_of_size(cols, k) {
                let csel = mask_indices(cmask, cols);
                let Some((x, v)) = solve_equalizing(payoff, &rsel, &csel, false) else {
                    continue;
                };
                let Some((y, w)) = solve_equalizing(payoff, &rsel, &csel, true) else {
                    continue;
                };
                if (v - w).abs() > 1e-7 * (1.0 + v.abs()) {
                    continue;
                }
                if x.iter().any(|&xi| xi < -tol) || y.iter().any(|&yi| yi < -tol) {
                    continue;
                }
                let mut xfull = vec![0.0; cols];
                for (pos, &j) in csel.iter().enumerate() {
                    xfull[j] = x[pos].max(0.0);
                }
                let mut yfull = vec![0.0; rows];
                for (pos, &i) in rsel.iter().enumerate() {
                    yfull[i] = y[pos].max(0.0);
                }
                // deviation checks: no pure row beats v, no pure column
                // undercuts w
                let kx = payoff.matvec(&xfull);
                if kx.iter().any(|&gi| gi > v + 1e-8 * (1.0 + v.abs())) {
                    continue;
                }
                let kty = payoff.matvec_transpose(&yfull);
                if kty.iter().any(|&gj| gj < w - 1e-8 * (1.0 + w.abs())) {
                    continue;
                }
                return Ok(GameSolution {
                    x: DenseVector::from_raw(xfull),
                    y: DenseVector::from_raw(yfull),
                    value: v,
                });
            }
        }
    }
    Err(Error::InfeasibleInstance(
        "support enumeration found no equilibrium (numerical degeneracy)".into(),
    ))
}

/// Solve for the strategy that equalizes the opponent's payoffs on the
/// support: unknowns are the support weights and the value.
fn solve_equalizing(
    payoff: &DenseMatrix,
    rsel: &[usize],
    csel: &[usize],
    transpose: bool,
) -> Option<(Vec<f64>, f64)> {
    let k = rsel.len();
    let mut a = DenseMatrix::zeros(k + 1, k + 1);
    let mut b = vec![0.0; k + 1];
    // for the column player (transpose = false): (K x)_i = v on the row
    // support, sum x = 1; mirrored for the row player
    for (eq, &i) in (if transpose { csel } else { rsel }).iter().enumerate() {
        for (var, &j) in (if transpose { rsel } else { csel }).iter().enumerate() {
            let val = if transpose {
                payoff.get(j, i)
            } else {
                payoff.get(i, j)
            };
            a.set(eq, var, val);
        }
        a.set(eq, k, -1.0);
    }
    for var in 0..k {
        a.set(k, var, 1.0);
    }
    b[k] = 1.0;
    let sol = lu_solve(&a, &b)?;
    let (weights, value) = sol.split_at(k);
    Some((weights.to_vec(), value[0]))
}

fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = u32> {
    (0u32..(1 << n)).filter(move |m| m.count_ones() as usize == k)
}

fn mask_indices(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}
