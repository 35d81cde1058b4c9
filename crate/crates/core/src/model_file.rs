//! Plain-text model files.
//!
//! One `key = value` pair per line; `#` starts a comment. Matrices are listed
//! in row-major order, separated by whitespace or commas (a `;` between rows is
//! allowed and ignored).
//!
//! ```text
//! kind = discrete          # or: continuous
//! n = 1                    # state dimension
//! m = 1                    # output dimension
//! A0 = 1                   # n
//! A1 = 0.99                # n x n
//! C = 1                    # m x n
//! gsq = 100 1              # n x (n+1): row i is  b_i0  b_i1 … b_in
//! Sigma_v = 1              # n x n, diagonal
//! Sigma_w = 1              # m x m
//! x0 = 1                   # optional true initial state for simulation
//! sample_times = 1 2 3     # continuous only
//! ```
//!
//! Row `i` of `gsq` gives `g_i²(x) = b_i0 + Σ_j b_ij x_j`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimate::fmt_f64;
use crate::linalg::{Matrix, Vector};
use crate::model::{AffineVariance, ContinuousDiscreteModel, ContinuousDynamics, DiscreteLinearModel};

#[derive(Debug, Clone, PartialEq)]
pub enum FileModel {
    Discrete(DiscreteLinearModel),
    Continuous(ContinuousDiscreteModel),
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: FileModel,
    pub x0: Option<Vector>,
}

const KEYS: &[&str] = &[
    "kind",
    "n",
    "m",
    "A0",
    "A1",
    "C",
    "gsq",
    "Sigma_v",
    "Sigma_w",
    "x0",
    "sample_times",
];

struct Entry {
    line: usize,
    value: String,
}

fn numbers(e: &Entry, key: &str) -> Result<Vec<f64>> {
    e.value
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: e.line,
                message: format!("{key}: '{s}' is not a number"),
            })
        })
        .collect()
}

fn count(e: &Entry, key: &str) -> Result<usize> {
    e.value.trim().parse::<usize>().map_err(|_| Error::Parse {
        line: e.line,
        message: format!("{key} must be a non-negative integer"),
    })
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: "expected 'key = value'".into(),
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key '{key}'"),
                });
            }
            let prev = entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
            if prev.is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }
        let last_line = text.lines().count().max(1);
        let get = |key: &str| {
            entries.get(key).ok_or_else(|| Error::Parse {
                line: last_line,
                message: format!("missing key '{key}'"),
            })
        };
        let n = count(get("n")?, "n")?;
        let m = count(get("m")?, "m")?;
        if n == 0 || m == 0 {
            return Err(Error::Parse {
                line: get("n")?.line,
                message: "n and m must be positive".into(),
            });
        }
        let matrix = |key: &str, rows: usize, cols: usize| -> Result<Matrix> {
            let e = get(key)?;
            let v = numbers(e, key)?;
            if v.len() != rows * cols {
                return Err(Error::Parse {
                    line: e.line,
                    message: format!("{key}: expected {} values ({rows}x{cols}), got {}", rows * cols, v.len()),
                });
            }
            Ok(Matrix::from_row_slice(rows, cols, &v))
        };

        let a0 = Vector::from_column_slice(matrix("A0", n, 1)?.as_slice());
        let a1 = matrix("A1", n, n)?;
        let c = matrix("C", m, n)?;
        let gsq = AffineVariance::new(matrix("gsq", n, n + 1)?)?;
        let sigma_v = matrix("Sigma_v", n, n)?;
        let sigma_w = matrix("Sigma_w", m, m)?;
        let x0 = match entries.get("x0") {
            Some(_) => Some(Vector::from_column_slice(matrix("x0", n, 1)?.as_slice())),
            None => None,
        };

        let kind = get("kind")?;
        let model = match kind.value.as_str() {
            "discrete" => {
                if let Some(e) = entries.get("sample_times") {
                    return Err(Error::Parse {
                        line: e.line,
                        message: "sample_times only applies to kind = continuous".into(),
                    });
                }
                FileModel::Discrete(DiscreteLinearModel::new(a0, a1, c, gsq, sigma_v, sigma_w)?)
            }
            "continuous" => {
                let times = numbers(get("sample_times")?, "sample_times")?;
                let dynamics = ContinuousDynamics {
                    a0,
                    a1,
                    gsq,
                    sigma_v,
                };
                FileModel::Continuous(ContinuousDiscreteModel::new(dynamics, c, sigma_w, times)?)
            }
            other => {
                return Err(Error::Parse {
                    line: kind.line,
                    message: format!("kind must be 'discrete' or 'continuous', got '{other}'"),
                })
            }
        };
        Ok(Self { model, x0 })
    }

    /// Canonical text; [`parse`](Self::parse) reads it back exactly.
    pub fn to_text(&self) -> String {
        let (kind, a0, a1, c, gsq, sv, sw, times) = match &self.model {
            FileModel::Discrete(d) => ("discrete", &d.a0, &d.a1, &d.c, &d.gsq, &d.sigma_v, &d.sigma_w, None),
            FileModel::Continuous(m) => (
                "continuous",
                &m.dynamics.a0,
                &m.dynamics.a1,
                &m.c,
                &m.dynamics.gsq,
                &m.dynamics.sigma_v,
                &m.sigma_w,
                Some(&m.sample_times),
            ),
        };
        let mut s = String::new();
        let _ = writeln!(s, "kind = {kind}");
        let _ = writeln!(s, "n = {}", a1.nrows());
        let _ = writeln!(s, "m = {}", c.nrows());
        let _ = writeln!(s, "A0 = {}", join(a0.iter().copied()));
        let _ = writeln!(s, "A1 = {}", rows(a1));
        let _ = writeln!(s, "C = {}", rows(c));
        let _ = writeln!(s, "gsq = {}", rows(gsq.coeffs()));
        let _ = writeln!(s, "Sigma_v = {}", rows(sv));
        let _ = writeln!(s, "Sigma_w = {}", rows(sw));
        if let Some(x0) = &self.x0 {
            let _ = writeln!(s, "x0 = {}", join(x0.iter().copied()));
        }
        if let Some(t) = times {
            let _ = writeln!(s, "sample_times = {}", join(t.iter().copied()));
        }
        s
    }
}

fn join(v: impl Iterator<Item = f64>) -> String {
    v.map(fmt_f64).collect::<Vec<_>>().join(" ")
}

fn rows(m: &Matrix) -> String {
    m.row_iter()
        .map(|r| join(r.iter().copied()))
        .collect::<Vec<_>>()
        .join(" ; ")
}
