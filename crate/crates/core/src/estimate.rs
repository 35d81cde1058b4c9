//! Estimates and per-step filter traces.

use std::io::{self, Write};

use crate::linalg::{is_psd, is_symmetric, upper_triangle, Matrix, Vector};

/// Conditional mean and covariance of the state at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    pub xhat: Vector,
    pub sigma: Matrix,
    /// Step index `k`.
    pub index: usize,
    /// Model time, for continuous-discrete runs.
    pub time: Option<f64>,
}

impl StateEstimate {
    pub fn new(xhat: Vector, sigma: Matrix, index: usize) -> Self {
        Self {
            xhat,
            sigma,
            index,
            time: None,
        }
    }

    pub fn at_time(xhat: Vector, sigma: Matrix, index: usize, time: f64) -> Self {
        Self {
            xhat,
            sigma,
            index,
            time: Some(time),
        }
    }

    pub fn dim(&self) -> usize {
        self.xhat.len()
    }

    /// Symmetry to `1e-10·(1+‖Σ‖∞)` and eigenvalues ≥ `−1e-10·‖Σ‖₂`.
    pub fn is_well_formed(&self) -> bool {
        self.sigma.shape() == (self.dim(), self.dim())
            && is_symmetric(&self.sigma, 1e-10)
            && is_psd(&self.sigma, 1e-10)
    }
}

/// One measurement step of a filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub prior: StateEstimate,
    pub posterior: StateEstimate,
    /// `y_k − C x̂_{k|k−1}`
    pub innovation: Vector,
    /// `C Σ_{k|k−1} C' + Σw`
    pub innovation_cov: Matrix,
    pub gain: Matrix,
}

/// Complete record of a filter run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterTrace {
    pub steps: Vec<TraceStep>,
    /// Number of gain evaluations that hit the `g²` floor.
    pub clamp_count: usize,
    /// Integrator steps taken (continuous-discrete runs only).
    pub integration_steps: usize,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn posterior_means(&self) -> Vec<Vector> {
        self.steps.iter().map(|s| s.posterior.xhat.clone()).collect()
    }

    pub fn last(&self) -> Option<&TraceStep> {
        self.steps.last()
    }

    /// Trace as CSV: `k[,t],xhat_prior_*,xhat_post_*,innovation_*,S_*,Sigma_post_*`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let Some(first) = self.steps.first() else {
            return writeln!(out, "k");
        };
        let n = first.prior.dim();
        let m = first.innovation.len();
        let timed = first.posterior.time.is_some();
        let mut header = vec!["k".to_string()];
        if timed {
            header.push("t".into());
        }
        header.extend((0..n).map(|i| format!("xhat_prior_{i}")));
        header.extend((0..n).map(|i| format!("xhat_post_{i}")));
        header.extend((0..m).map(|i| format!("innovation_{i}")));
        header.extend((0..m).map(|i| format!("S_{i}{i}")));
        for i in 0..n {
            for j in i..n {
                header.push(format!("Sigma_post_{i}{j}"));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        for s in &self.steps {
            let mut row = vec![s.posterior.index.to_string()];
            if let Some(t) = s.posterior.time {
                row.push(fmt_f64(t));
            }
            row.extend(s.prior.xhat.iter().map(|&v| fmt_f64(v)));
            row.extend(s.posterior.xhat.iter().map(|&v| fmt_f64(v)));
            row.extend(s.innovation.iter().map(|&v| fmt_f64(v)));
            row.extend(s.innovation_cov.diagonal().iter().map(|&v| fmt_f64(v)));
            row.extend(upper_triangle(&s.posterior.sigma).into_iter().map(fmt_f64));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
