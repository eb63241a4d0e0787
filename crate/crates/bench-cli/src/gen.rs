//! Deterministic instance generators behind a compact spec-string grammar:
//! `random_grid_mrf(W,H,L,kind,weight,trunc,seed)`,
//! `submodular_grid(W,H,seed)`, `eq_qp(dim,constraints,seed)`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fw_saddle::mrf::{PairwiseKind, PairwisePotential};

use crate::instance::InstanceFile;
use crate::{BenchError, Result};

pub fn generate_instance(spec: &str) -> Result<InstanceFile> {
    let spec = spec.trim();
    let open = spec
        .find('(')
        .ok_or_else(|| BenchError::Instance(format!("bad generator spec '{spec}'")))?;
    if !spec.ends_with(')') {
        return Err(BenchError::Instance(format!("bad generator spec '{spec}'")));
    }
    let name = &spec[..open];
    let args: Vec<&str> = spec[open + 1..spec.len() - 1]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    match name {
        "random_grid_mrf" => {
            expect_args(&args, 7, spec)?;
            let (w, h, l) = (parse::<usize>(args[0])?, parse::<usize>(args[1])?, parse::<usize>(args[2])?);
            let kind = match args[3] {
                "potts" => PairwiseKind::Potts,
                "truncated_linear" => PairwiseKind::TruncatedLinear,
                "truncated_quadratic" => PairwiseKind::TruncatedQuadratic,
                other => {
                    return Err(BenchError::Instance(format!(
                        "unknown pairwise kind '{other}'"
                    )))
                }
            };
            let weight = parse::<f64>(args[4])?;
            let truncation = parse::<f64>(args[5])?;
            let seed = parse::<u64>(args[6])?;
            if weight < 0.0 || truncation < 0.0 {
                return Err(BenchError::Instance(
                    "weight and truncation must be nonnegative".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let unary = (0..w * h * l).map(|_| rng.gen_range(0.0..1.0)).collect();
            Ok(InstanceFile::GridMrf {
                width: w,
                height: h,
                labels: l,
                unary,
                pairwise: PairwisePotential {
                    kind,
                    weight,
                    truncation,
                },
            })
        }
        "submodular_grid" => {
            expect_args(&args, 3, spec)?;
            let (w, h) = (parse::<usize>(args[0])?, parse::<usize>(args[1])?);
            let seed = parse::<u64>(args[2])?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // two labels with an attractive Potts term: the chain relaxation
            // is tight, so the MAP energy is an exact dual reference
            let unary = (0..w * h * 2).map(|_| rng.gen_range(0.0..1.0)).collect();
            let weight = rng.gen_range(0.1..0.4);
            Ok(InstanceFile::GridMrf {
                width: w,
                height: h,
                labels: 2,
                unary,
                pairwise: PairwisePotential::potts(weight),
            })
        }
        "eq_qp" => {
            expect_args(&args, 3, spec)?;
            let dim = parse::<usize>(args[0])?;
            let m = parse::<usize>(args[1])?;
            let seed = parse::<u64>(args[2])?;
            if dim == 0 {
                return Err(BenchError::Instance("eq_qp needs dim >= 1".into()));
            }
            if m >= dim {
                return Err(BenchError::Instance(
                    "eq_qp needs fewer constraints than dimensions".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            // rhs from a strictly interior simplex point so the feasible
            // set is nonempty
            let mut interior: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..1.5)).collect();
            let s: f64 = interior.iter().sum();
            for v in interior.iter_mut() {
                *v /= s;
            }
            let b: Vec<f64> = a
                .iter()
                .map(|row| row.iter().zip(interior.iter()).map(|(x, y)| x * y).sum())
                .collect();
            Ok(InstanceFile::EqQp { dim, center, a, b })
        }
        other => Err(BenchError::Instance(format!(
            "unknown generator '{other}'"
        ))),
    }
}

fn expect_args(args: &[&str], n: usize, spec: &str) -> Result<()> {
    if args.len() != n {
        return Err(BenchError::Instance(format!(
            "'{spec}' takes {n} arguments, got {}",
            args.len()
        )));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| BenchError::Instance(format!("cannot parse '{s}'")))
}
