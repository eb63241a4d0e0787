//! Per-iteration run records, the fixed-schema CSV, and the summary JSON.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{BenchError, Result};

pub const CSV_HEADER: [&str; 10] = [
    "n", "lmo_calls", "t_n", "eps_n", "dual_H", "dual_exact", "primal", "gap", "infeas",
    "wall_ms",
];

/// One outer iteration of a solver run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub n: u64,
    /// cumulative oracle calls, including per-row dual evaluations
    pub lmo_calls: u64,
    pub t_n: f64,
    pub eps_n: f64,
    pub dual_h: f64,
    pub dual_exact: bool,
    /// primal objective (decoded energy on MRF instances)
    pub primal: f64,
    /// inner FW gap certified at this iteration
    pub gap: f64,
    /// `||Ax - b||` for linearly constrained problems, absent otherwise
    pub infeas: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub records: Vec<RunRecord>,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.n.to_string(),
                r.lmo_calls.to_string(),
                r.t_n.to_string(),
                r.eps_n.to_string(),
                r.dual_h.to_string(),
                r.dual_exact.to_string(),
                r.primal.to_string(),
                r.gap.to_string(),
                r.infeas.map(|v| v.to_string()).unwrap_or_default(),
                r.wall_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        {
            let got = rdr.headers()?;
            if got.len() != CSV_HEADER.len() || got.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
                return Err(BenchError::Fit(format!(
                    "unexpected CSV header {got:?}; expected {CSV_HEADER:?}"
                )));
            }
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let field = |i: usize| -> &str { row.get(i).unwrap_or("") };
            let parse_f = |i: usize| -> Result<f64> {
                field(i)
                    .parse()
                    .map_err(|_| BenchError::Fit(format!("bad float '{}' in CSV", field(i))))
            };
            records.push(RunRecord {
                n: field(0)
                    .parse()
                    .map_err(|_| BenchError::Fit("bad n column".into()))?,
                lmo_calls: field(1)
                    .parse()
                    .map_err(|_| BenchError::Fit("bad lmo_calls column".into()))?,
                t_n: parse_f(2)?,
                eps_n: parse_f(3)?,
                dual_h: parse_f(4)?,
                dual_exact: field(5) == "true",
                primal: parse_f(6)?,
                gap: parse_f(7)?,
                infeas: if field(8).is_empty() {
                    None
                } else {
                    Some(parse_f(8)?)
                },
                wall_ms: parse_f(9)?,
            });
        }
        Ok(Self { records })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }
}

/// Fitted log-log slopes against the configured references.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Slopes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeas: Option<f64>,
}

/// Abnormal events surfaced from the solver.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct RunFlags {
    pub inner_cap_hits: u64,
    pub lmo_budget_hit: bool,
    pub line_search_fallbacks: u64,
    pub reopt_capped: u64,
    pub atom_cap_hits: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub iterations: u64,
    pub total_lmo_calls: u64,
    pub good_steps: u64,
    pub bad_steps: u64,
    pub initial_gap: f64,
    pub final_dual: f64,
    pub final_dual_ergodic: f64,
    pub dual_exact: bool,
    pub final_primal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_infeas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Slopes>,
    pub flags: RunFlags,
}

impl Summary {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}
