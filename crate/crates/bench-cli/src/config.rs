//! Run configuration: a TOML file mirroring these structs drives `solve`.

use serde::{Deserialize, Serialize};

use fw_saddle::appa::{EpsKind, EpsSchedule, TSchedule};

use crate::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// accelerated proximal point on the dual
    Appa,
    /// proximal point (t_n = 1)
    Ppa,
    /// primal-dual splitting
    Pd,
}

/// Momentum schedule spec: either a plain name or an `aujol_dossal` table
/// with its two parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TScheduleCfg {
    Name(String),
    Parametrized { kind: String, a: f64, d: f64 },
}

impl TScheduleCfg {
    pub fn to_schedule(&self) -> Result<TSchedule> {
        match self {
            TScheduleCfg::Name(name) => match name.as_str() {
                "constant_one" => Ok(TSchedule::ConstantOne),
                "nesterov" => Ok(TSchedule::Nesterov),
                "aggressive" => Ok(TSchedule::Aggressive),
                other => Err(BenchError::Config(format!(
                    "unknown t_schedule '{other}' (expected constant_one, nesterov, aggressive, or an aujol_dossal table)"
                ))),
            },
            TScheduleCfg::Parametrized { kind, a, d } => {
                if kind == "aujol_dossal" {
                    Ok(TSchedule::AujolDossal { a: *a, d: *d })
                } else {
                    Err(BenchError::Config(format!(
                        "unknown parametrized t_schedule '{kind}'"
                    )))
                }
            }
        }
    }
}

/// Inner-accuracy schedule spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsCfg {
    /// "power" (n^-alpha) or "theory" (n^-(4+delta), or n^-(2+delta) for pd)
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// explicit scale; defaults to the first measured gap
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl EpsCfg {
    pub fn to_schedule(&self) -> Result<EpsSchedule> {
        let kind = match self.kind.as_str() {
            "power" => EpsKind::Power {
                alpha: self.alpha.unwrap_or(3.0),
            },
            "theory" => EpsKind::Theory {
                delta: self.delta.unwrap_or(0.1),
            },
            other => {
                return Err(BenchError::Config(format!(
                    "unknown eps schedule kind '{other}'"
                )))
            }
        };
        Ok(EpsSchedule {
            kind,
            scale: self.scale,
        })
    }

    /// The pd exponent is 2+delta; a power spec passes alpha through as
    /// the full exponent minus 2.
    pub fn pd_delta(&self) -> Result<f64> {
        match self.kind.as_str() {
            "theory" => Ok(self.delta.unwrap_or(0.1)),
            "power" => {
                let alpha = self.alpha.unwrap_or(3.0);
                if alpha <= 2.0 {
                    return Err(BenchError::Config(
                        "pd needs an eps exponent above 2".into(),
                    ));
                }
                Ok(alpha - 2.0)
            }
            other => Err(BenchError::Config(format!(
                "unknown eps schedule kind '{other}'"
            ))),
        }
    }
}

/// Where the instance comes from: a problem file or a generator spec string.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PdCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// Optimal-value references; when present the summary carries fitted
/// slopes against them.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct ReferenceCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primal: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub solver: SolverKind,
    /// smoothing parameter; required for appa/ppa, no default
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_schedule: Option<TScheduleCfg>,
    pub eps_schedule: EpsCfg,
    pub max_outer_iters: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lmo_calls: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSource>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd: Option<PdCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCfg>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Resolve the momentum schedule: appa defaults to aggressive, ppa is
    /// pinned to the constant schedule.
    pub fn t_schedule(&self) -> Result<TSchedule> {
        match self.solver {
            SolverKind::Ppa => {
                if let Some(cfg) = &self.t_schedule {
                    let s = cfg.to_schedule()?;
                    if s != TSchedule::ConstantOne {
                        return Err(BenchError::Config(
                            "ppa uses t_n = 1; drop t_schedule or set constant_one".into(),
                        ));
                    }
                }
                Ok(TSchedule::ConstantOne)
            }
            _ => match &self.t_schedule {
                Some(cfg) => cfg.to_schedule(),
                None => Ok(TSchedule::Aggressive),
            },
        }
    }

    pub fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or_else(|| {
            BenchError::Config("gamma is required (no default; pick it per instance scale)".into())
        })
    }
}
