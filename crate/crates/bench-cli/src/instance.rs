//! Problem instance files (TOML) and their assembly into saddle problems.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use fw_saddle::linalg::DenseMatrix;
use fw_saddle::mrf::{build_saddle, GridMrf, MrfSaddle, PairwisePotential};
use fw_saddle::problem::{
    AxbStructure, DenseVector, LinearFn, LmoHandle, MatrixMap, SaddleProblem, SimplexPolytope,
    SmoothPart,
};

use crate::{BenchError, Result};

/// On-disk instance document, discriminated by `kind`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceFile {
    /// 4-connected grid MRF: unaries row-major `W*H*L`, one shared
    /// pairwise potential
    GridMrf {
        width: usize,
        height: usize,
        labels: usize,
        unary: Vec<f64>,
        pairwise: PairwisePotential,
    },
    /// minimize ½||x - center||² over the simplex subject to A x = b
    EqQp {
        dim: usize,
        center: Vec<f64>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    /// bilinear matrix game over two simplices
    MatrixGame { payoff: Vec<Vec<f64>> },
}

impl InstanceFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// A built problem plus whatever is needed to interpret its iterates.
pub enum BuiltProblem {
    Mrf(MrfSaddle),
    Qp(SaddleProblem),
    Game(SaddleProblem),
}

impl BuiltProblem {
    pub fn problem(&self) -> &SaddleProblem {
        match self {
            BuiltProblem::Mrf(m) => &m.problem,
            BuiltProblem::Qp(p) | BuiltProblem::Game(p) => p,
        }
    }
}

pub fn build_instance(file: InstanceFile) -> Result<BuiltProblem> {
    match file {
        InstanceFile::GridMrf {
            width,
            height,
            labels,
            unary,
            pairwise,
        } => {
            let mrf = GridMrf::new(width, height, labels, unary, pairwise)
                .map_err(BenchError::Solver)?;
            Ok(BuiltProblem::Mrf(build_saddle(mrf)))
        }
        InstanceFile::EqQp { dim, center, a, b } => {
            if center.len() != dim {
                return Err(BenchError::Instance(format!(
                    "center has {} entries, dim is {dim}",
                    center.len()
                )));
            }
            if a.len() != b.len() {
                return Err(BenchError::Instance(format!(
                    "{} constraint rows but {} rhs entries",
                    a.len(),
                    b.len()
                )));
            }
            for row in &a {
                if row.len() != dim {
                    return Err(BenchError::Instance(format!(
                        "constraint row has {} entries, dim is {dim}",
                        row.len()
                    )));
                }
            }
            let amat = if a.is_empty() {
                DenseMatrix::zeros(0, dim)
            } else {
                DenseMatrix::from_rows(a).map_err(BenchError::Solver)?
            };
            let bvec = DenseVector::new(b).map_err(BenchError::Solver)?;
            Ok(BuiltProblem::Qp(SaddleProblem {
                k: Arc::new(MatrixMap::new(amat)),
                f: Arc::new(SmoothPart::IsoQuadratic {
                    alpha: 1.0,
                    center: DenseVector::new(center).map_err(BenchError::Solver)?,
                }),
                lmo: LmoHandle::new(Arc::new(SimplexPolytope { dim })),
                h_star: Arc::new(LinearFn { b: bvec.clone() }),
                axb: Some(AxbStructure { b: bvec }),
            }))
        }
        InstanceFile::MatrixGame { payoff } => {
            let k = DenseMatrix::from_rows(payoff).map_err(BenchError::Solver)?;
            Ok(BuiltProblem::Game(fw_saddle::games::build_matrix_game(k)))
        }
    }
}
