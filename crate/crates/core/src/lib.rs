//! Solvers for convex-concave saddle problems
//! `min_x max_y <Kx,y> + f(x) + δ_P(x) - h*(y)`
//! where the polytope `P` is reachable only through a linear minimization
//! oracle and `h*` only through its proximal map.
//!
//! The crate provides:
//! - problem abstractions (vectors, linear maps, lmo/prox handles) in [`problem`],
//! - certified Frank-Wolfe inner solvers in [`fw`],
//! - the smoothed primal objective and Moreau-envelope utilities in [`smoothing`],
//! - an inexact accelerated proximal point outer loop in [`appa`],
//! - an inexact primal-dual outer loop in [`pd`],
//! - a grid-MRF Lagrangian relaxation with chain DP oracles in [`mrf`],
//! - bilinear matrix games (mostly as exactly solvable test problems) in [`games`].

pub mod appa;
pub mod error;
pub mod fw;
pub mod games;
pub mod linalg;
pub mod mrf;
pub mod pd;
pub mod problem;
pub mod smoothing;

pub use error::Error;
pub use problem::{
    estimate_operator_norm, inner_product, Atom, AtomId, DenseVector, LinearMap, LinearMinimizer,
    LmoHandle, ProxFn, SaddleProblem, SmoothPart,
};
