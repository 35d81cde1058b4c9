//! Filter estimates recovered by minimizing a stacked weighted least-squares
//! cost over the whole trajectory.
//!
//! The cost over `z = [x_0, …, x_k]` is built recursively:
//!
//! - a prior term on `x_0`,
//! - for each transition, `½ r̃' Σv⁻¹ r̃` where `r̃` linearizes
//!   `r(x_j, x_{j−1}) = G⁻¹(x_{j−1})(x_j − f(x_{j−1}))` about the running
//!   estimate `x̂_{j−1}`,
//! - for each measurement, `½ (y_j − C x_j)' Σw⁻¹ (y_j − C x_j)`.
//!
//! Every term is quadratic, so one Newton step from any starting trajectory
//! reaches the minimizer. The Hessian couples only consecutive blocks and is
//! solved with a block Thomas recursion; the marginal covariance of the last
//! state is the bottom-right block of its inverse.
//!
//! Block 0 is parameterized as `x_0 = m + L η` with `L L' = Σ_{1|0}` and prior
//! term `½ η'η`, so directions outside the range of `Σ_{1|0}` are pinned to
//! the prior mean (`Σ_{1|0} = 0` fixes `x_0 = m`).

use std::io::{self, Write};

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::estimate::StateEstimate;
use crate::linalg::{max_abs, psd_factor, rel_diff, rel_diff_vec, Matrix, Vector};
use crate::model::{StateDynamics, GAIN_SQ_FLOOR};

/// States `x_0 … x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedTrajectory {
    pub states: Vec<Vector>,
}

impl StackedTrajectory {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// The concatenation `[x_0; x_1; …; x_k]`.
    pub fn stacked(&self) -> Vector {
        let total: usize = self.states.iter().map(|x| x.len()).sum();
        let mut z = Vector::zeros(total);
        let mut at = 0;
        for x in &self.states {
            z.rows_mut(at, x.len()).copy_from(x);
            at += x.len();
        }
        z
    }
}

/// Which kind of cost term, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Prior,
    Transition,
    Measurement,
}

/// `½ (r0 + Σ_b J_b ξ_b)' W (r0 + Σ_b J_b ξ_b)`
#[derive(Debug, Clone, PartialEq)]
pub struct CostTerm {
    pub kind: TermKind,
    pub r0: Vector,
    pub jacobians: Vec<(usize, Matrix)>,
    pub weight: Matrix,
}

impl CostTerm {
    fn residual(&self, coords: &[Vector]) -> Vector {
        let mut r = self.r0.clone();
        for (b, j) in &self.jacobians {
            r += j * &coords[*b];
        }
        r
    }

    fn value(&self, coords: &[Vector]) -> f64 {
        let r = self.residual(coords);
        0.5 * (r.transpose() * &self.weight * &r)[(0, 0)]
    }
}

/// Quadratic cost in the block coordinates `ξ` (`ξ_0 = η`, `ξ_j = x_j` for
/// `j ≥ 1`), with its Hessian stored as block tridiagonal.
///
/// `J̃(ξ) = ½ ξ'Hξ − b'ξ + const`, so `∇J̃(ξ) = Hξ − b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    n: usize,
    prior_mean: Vector,
    prior_factor: Matrix,
    terms: Vec<CostTerm>,
    diag: Vec<Matrix>,
    upper: Vec<Matrix>,
    b: Vec<Vector>,
    /// Expansion trajectory in state coordinates.
    expansion: Vec<Vector>,
}

impl QuadraticCost {
    /// Cost with only the prior term on `x_0 ~ (mean, cov)`.
    pub fn with_prior(mean: &Vector, cov: &Matrix) -> Self {
        let n = mean.len();
        let factor = psd_factor(cov, 1e-14);
        let r = factor.ncols();
        let mut cost = Self {
            n,
            prior_mean: mean.clone(),
            prior_factor: factor,
            terms: Vec::new(),
            diag: vec![Matrix::zeros(r, r)],
            upper: Vec::new(),
            b: vec![Vector::zeros(r)],
            expansion: vec![mean.clone()],
        };
        cost.add_term(CostTerm {
            kind: TermKind::Prior,
            r0: Vector::zeros(r),
            jacobians: vec![(0, Matrix::identity(r, r))],
            weight: Matrix::identity(r, r),
        });
        cost
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// Index of the last block (`k`).
    pub fn horizon(&self) -> usize {
        self.diag.len() - 1
    }

    pub fn block_dim(&self, block: usize) -> usize {
        self.diag[block].nrows()
    }

    pub fn terms(&self) -> &[CostTerm] {
        &self.terms
    }

    pub fn expansion(&self) -> &[Vector] {
        &self.expansion
    }

    /// `x_j = offset_j + T_j ξ_j`
    fn lift(&self, block: usize) -> (Vector, Matrix) {
        if block == 0 {
            (self.prior_mean.clone(), self.prior_factor.clone())
        } else {
            (Vector::zeros(self.n), Matrix::identity(self.n, self.n))
        }
    }

    pub fn to_states(&self, coords: &[Vector]) -> StackedTrajectory {
        StackedTrajectory {
            states: coords
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let (o, t) = self.lift(j);
                    o + t * c
                })
                .collect(),
        }
    }

    /// Inverse of [`to_states`](Self::to_states) (least squares on block 0).
    pub fn to_coords(&self, z: &StackedTrajectory) -> Result<Vec<Vector>> {
        if z.states.len() != self.diag.len() {
            return Err(Error::LengthMismatch {
                left: z.states.len(),
                right: self.diag.len(),
            });
        }
        let mut out = Vec::with_capacity(z.states.len());
        for (j, x) in z.states.iter().enumerate() {
            if j == 0 {
                let l = &self.prior_factor;
                let gram = l.transpose() * l;
                let rhs = l.transpose() * (x - &self.prior_mean);
                let eta = match gram.cholesky() {
                    Some(c) => c.solve(&rhs),
                    None => Vector::zeros(l.ncols()),
                };
                out.push(eta);
            } else {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    fn add_term(&mut self, term: CostTerm) {
        for (bi, ji) in &term.jacobians {
            let jtw = ji.transpose() * &term.weight;
            self.b[*bi] -= &jtw * &term.r0;
            for (bj, jj) in &term.jacobians {
                let block = &jtw * jj;
                if bi == bj {
                    self.diag[*bi] += block;
                } else if *bj == bi + 1 {
                    self.upper[*bi] += block;
                }
            }
        }
        self.terms.push(term);
    }

    /// Exact value of the cost, summed term by term.
    pub fn value(&self, coords: &[Vector]) -> f64 {
        self.terms.iter().map(|t| t.value(coords)).sum()
    }

    /// `Hξ` using the block storage.
    pub fn hessian_mul(&self, coords: &[Vector]) -> Vec<Vector> {
        let k = self.horizon();
        (0..=k)
            .map(|j| {
                let mut out = &self.diag[j] * &coords[j];
                if j > 0 {
                    out += self.upper[j - 1].transpose() * &coords[j - 1];
                }
                if j < k {
                    out += &self.upper[j] * &coords[j + 1];
                }
                out
            })
            .collect()
    }

    pub fn gradient(&self, coords: &[Vector]) -> Vec<Vector> {
        self.hessian_mul(coords)
            .into_iter()
            .zip(&self.b)
            .map(|(h, b)| h - b)
            .collect()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.diag
            .iter()
            .map(|d| {
                let o = at;
                at += d.nrows();
                o
            })
            .collect()
    }

    /// Dense Hessian from the block storage.
    pub fn dense_hessian(&self) -> Matrix {
        let offs = self.offsets();
        let total: usize = self.diag.iter().map(|d| d.nrows()).sum();
        let mut h = Matrix::zeros(total, total);
        for (j, d) in self.diag.iter().enumerate() {
            h.view_mut((offs[j], offs[j]), d.shape()).copy_from(d);
        }
        for (j, u) in self.upper.iter().enumerate() {
            h.view_mut((offs[j], offs[j + 1]), u.shape()).copy_from(u);
            h.view_mut((offs[j + 1], offs[j]), (u.ncols(), u.nrows()))
                .copy_from(&u.transpose());
        }
        h
    }

    /// Dense Hessian accumulated directly from the terms, with every
    /// cross-block product kept (used to check the block structure).
    pub fn dense_hessian_from_terms(&self) -> Matrix {
        let offs = self.offsets();
        let total: usize = self.diag.iter().map(|d| d.nrows()).sum();
        let mut h = Matrix::zeros(total, total);
        for t in &self.terms {
            for (bi, ji) in &t.jacobians {
                for (bj, jj) in &t.jacobians {
                    let block = ji.transpose() * &t.weight * jj;
                    let mut v = h.view_mut((offs[*bi], offs[*bj]), block.shape());
                    v += &block;
                }
            }
        }
        h
    }

    pub fn block_offsets(&self) -> Vec<usize> {
        self.offsets()
    }

    fn push_block(&mut self, expansion: Vector) {
        let n = self.n;
        let prev = self.block_dim(self.horizon());
        self.diag.push(Matrix::zeros(n, n));
        self.upper.push(Matrix::zeros(prev, n));
        self.b.push(Vector::zeros(n));
        self.expansion.push(expansion);
    }
}

/// Options for the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Floor `g²` as the filters do; otherwise a floored gain is an error.
    pub clamp: bool,
    /// Largest horizon `oracle_filter` accepts.
    pub max_horizon: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            clamp: true,
            max_horizon: 2000,
        }
    }
}

/// Append the transition term from block `k−1` to a new block `k`,
/// linearized about `x̂_{k−1} = xhat_prev`. The new block's expansion point
/// is `f(x̂_{k−1})`, where the `∂G⁻¹/∂x (x_k − f(x̂_{k−1}))` coefficient
/// vanishes.
pub fn build_time_cost<M: StateDynamics + ?Sized>(
    prev: &QuadraticCost,
    model: &M,
    xhat_prev: &Vector,
    cfg: &OracleConfig,
) -> Result<QuadraticCost> {
    let n = prev.state_dim();
    let sigma_v_inv = model
        .process_noise()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidModel("the oracle needs Sigma_v positive definite".into()))?;
    let f_hat = model.drift(xhat_prev);
    let df = model.drift_jacobian(xhat_prev);
    let g = model.gain(xhat_prev);
    if !cfg.clamp {
        if let Some((i, &v)) = g.squared.iter().enumerate().find(|(_, &v)| v <= GAIN_SQ_FLOOR) {
            return Err(Error::SingularG { index: i, value: v });
        }
    }
    let g_inv = Matrix::from_diagonal(&g.diag.map(|v| 1.0 / v));
    let successor = f_hat.clone();
    let coupling = transition_coupling(model, xhat_prev, &successor);
    let q = -(&g_inv * &df) + coupling;

    let mut cost = prev.clone();
    let k_prev = cost.horizon();
    cost.push_block(successor);
    let k = k_prev + 1;
    let (off_prev, lift_prev) = cost.lift(k_prev);
    let (off_new, lift_new) = cost.lift(k);
    let r0 = &g_inv * (off_new - &f_hat) + &q * (off_prev - xhat_prev);
    debug_assert_eq!(r0.len(), n);
    cost.add_term(CostTerm {
        kind: TermKind::Transition,
        r0,
        jacobians: vec![(k_prev, &q * lift_prev), (k, &g_inv * lift_new)],
        weight: sigma_v_inv,
    });
    Ok(cost)
}

/// `∂G⁻¹(x)/∂x (x_next − f(x̂))` as a matrix acting on `x_{k−1} − x̂`.
pub fn transition_coupling<M: StateDynamics + ?Sized>(
    model: &M,
    xhat_prev: &Vector,
    x_next: &Vector,
) -> Matrix {
    let d = model.inverse_gain_jacobian(xhat_prev);
    let gap = x_next - model.drift(xhat_prev);
    Matrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] * gap[i])
}

/// Add `½ (y − C x_k)' Σw⁻¹ (y − C x_k)` on the last block.
pub fn build_measurement_cost(
    cost: &QuadraticCost,
    y: &Vector,
    c: &Matrix,
    sigma_w: &Matrix,
) -> Result<QuadraticCost> {
    let w = sigma_w
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("Sigma_w not positive definite".into()))?
        .inverse();
    let k = cost.horizon();
    let (offset, lift) = cost.lift(k);
    let mut out = cost.clone();
    out.add_term(CostTerm {
        kind: TermKind::Measurement,
        r0: y - c * offset,
        jacobians: vec![(k, -(c * lift))],
        weight: w,
    });
    Ok(out)
}

/// Minimizer of a quadratic cost and the marginal covariance of its last block.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub trajectory: StackedTrajectory,
    pub coords: Vec<Vector>,
    pub last_mean: Vector,
    pub last_cov: Matrix,
    pub gradient_norm_start: f64,
    pub gradient_norm_end: f64,
    /// `‖Δz₂‖ / (1 + ‖z*‖)` for a second Newton step taken from `z*`.
    pub second_step: f64,
}

struct BlockFactor {
    schur: Vec<Cholesky<f64, nalgebra::Dyn>>,
}

impl BlockFactor {
    fn new(cost: &QuadraticCost) -> Result<Self> {
        let mut schur: Vec<Cholesky<f64, nalgebra::Dyn>> = Vec::with_capacity(cost.diag.len());
        for j in 0..cost.diag.len() {
            let mut s = cost.diag[j].clone();
            if j > 0 {
                let u = &cost.upper[j - 1];
                s -= u.transpose() * schur[j - 1].solve(u);
            }
            crate::linalg::symmetrize(&mut s);
            schur.push(s.cholesky().ok_or(Error::IndefiniteHessian { block: j })?);
        }
        Ok(Self { schur })
    }

    fn solve(&self, cost: &QuadraticCost, rhs: &[Vector]) -> Vec<Vector> {
        let k = self.schur.len() - 1;
        let mut c: Vec<Vector> = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let mut cj = rhs[j].clone();
            if j > 0 {
                cj -= cost.upper[j - 1].transpose() * self.schur[j - 1].solve(&c[j - 1]);
            }
            c.push(cj);
        }
        let mut x = vec![Vector::zeros(0); k + 1];
        for j in (0..=k).rev() {
            let mut r = c[j].clone();
            if j < k {
                r -= &cost.upper[j] * &x[j + 1];
            }
            x[j] = self.schur[j].solve(&r);
        }
        x
    }

    /// Bottom-right block of `H⁻¹`.
    fn last_inverse_block(&self) -> Matrix {
        self.schur.last().expect("at least one block").inverse()
    }
}

fn norm(blocks: &[Vector]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

/// One Newton step `z* = z0 − H⁻¹∇J̃(z0)`.
pub fn newton_solve(cost: &QuadraticCost, z0: &StackedTrajectory) -> Result<OracleSolution> {
    let start = cost.to_coords(z0)?;
    newton_from_coords(cost, start)
}

fn newton_from_coords(cost: &QuadraticCost, start: Vec<Vector>) -> Result<OracleSolution> {
    let factor = BlockFactor::new(cost)?;
    let g0 = cost.gradient(&start);
    let step = factor.solve(cost, &g0);
    let coords: Vec<Vector> = start.iter().zip(&step).map(|(z, d)| z - d).collect();
    let g1 = cost.gradient(&coords);
    let step2 = factor.solve(cost, &g1);
    let k = cost.horizon();
    let (_, lift) = cost.lift(k);
    let last_cov = &lift * factor.last_inverse_block() * lift.transpose();
    let trajectory = cost.to_states(&coords);
    Ok(OracleSolution {
        last_mean: trajectory.states[k].clone(),
        last_cov,
        second_step: norm(&step2) / (1.0 + norm(&coords)),
        gradient_norm_start: norm(&g0),
        gradient_norm_end: norm(&g1),
        trajectory,
        coords,
    })
}

/// Oracle output at one measurement step.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub index: usize,
    /// Minimizer before the measurement (`x̂_{k|k−1}`, `Σ_{k|k−1}`).
    pub prior: OracleSolution,
    /// Minimizer after the measurement (`x̂_{k|k}`, `Σ_{k|k}`).
    pub posterior: OracleSolution,
    /// Largest entry of `∂G⁻¹/∂x (x_k − f(x̂_{k−1}))` at the posterior
    /// minimizer: the coupling frozen at zero by the expansion choice.
    pub frozen_coupling: f64,
}

impl OracleStep {
    pub fn prior_estimate(&self) -> StateEstimate {
        StateEstimate::new(self.prior.last_mean.clone(), self.prior.last_cov.clone(), self.index)
    }

    pub fn posterior_estimate(&self) -> StateEstimate {
        StateEstimate::new(
            self.posterior.last_mean.clone(),
            self.posterior.last_cov.clone(),
            self.index,
        )
    }
}

/// Recompute the filter estimates step by step from the stacked cost.
/// Transition terms are linearized at the oracle's own running posterior
/// estimates and are not revisited.
pub fn oracle_filter<M: StateDynamics + ?Sized>(
    model: &M,
    measurements: &[Vector],
    init: &StateEstimate,
    cfg: &OracleConfig,
) -> Result<Vec<OracleStep>> {
    if measurements.len() > cfg.max_horizon + 1 {
        return Err(Error::Config(format!(
            "oracle horizon {} exceeds the cap {}",
            measurements.len() - 1,
            cfg.max_horizon
        )));
    }
    let mut out: Vec<OracleStep> = Vec::with_capacity(measurements.len());
    let mut cost = QuadraticCost::with_prior(&init.xhat, &init.sigma);
    for (i, y) in measurements.iter().enumerate() {
        let (prior_cost, start, xhat_prev) = match out.last() {
            None => {
                let r = cost.block_dim(0);
                (cost.clone(), vec![Vector::zeros(r)], None)
            }
            Some(prev) => {
                let xhat_prev = prev.posterior.last_mean.clone();
                let next = build_time_cost(&cost, model, &xhat_prev, cfg)?;
                let mut start = prev.posterior.coords.clone();
                start.push(model.drift(&xhat_prev));
                (next, start, Some(xhat_prev))
            }
        };
        let prior = newton_from_coords(&prior_cost, start)?;
        cost = build_measurement_cost(
            &prior_cost,
            y,
            model.output_matrix(),
            model.measurement_noise(),
        )?;
        let posterior = newton_from_coords(&cost, prior.coords.clone())?;
        let frozen_coupling = match &xhat_prev {
            Some(xp) => max_abs(&transition_coupling(model, xp, &posterior.last_mean)),
            None => 0.0,
        };
        out.push(OracleStep {
            index: init.index + i,
            prior,
            posterior,
            frozen_coupling,
        });
    }
    Ok(out)
}

/// Per-step agreement between the oracle and a filter trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceRow {
    pub index: usize,
    pub gradient_norm: f64,
    pub second_step: f64,
    pub prior_mean_delta: f64,
    pub prior_cov_delta: f64,
    pub post_mean_delta: f64,
    pub post_cov_delta: f64,
    pub frozen_coupling: f64,
}

impl EquivalenceRow {
    pub fn max_delta(&self) -> f64 {
        self.prior_mean_delta
            .max(self.prior_cov_delta)
            .max(self.post_mean_delta)
            .max(self.post_cov_delta)
    }
}

/// Relative differences between oracle steps and filter trace steps.
pub fn compare_with_trace(
    oracle: &[OracleStep],
    trace: &crate::estimate::FilterTrace,
) -> Result<Vec<EquivalenceRow>> {
    if oracle.len() != trace.len() {
        return Err(Error::LengthMismatch {
            left: oracle.len(),
            right: trace.len(),
        });
    }
    Ok(oracle
        .iter()
        .zip(&trace.steps)
        .map(|(o, s)| EquivalenceRow {
            index: o.index,
            gradient_norm: o.posterior.gradient_norm_end,
            second_step: o.posterior.second_step,
            prior_mean_delta: rel_diff_vec(&o.prior.last_mean, &s.prior.xhat),
            prior_cov_delta: rel_diff(&o.prior.last_cov, &s.prior.sigma),
            post_mean_delta: rel_diff_vec(&o.posterior.last_mean, &s.posterior.xhat),
            post_cov_delta: rel_diff(&o.posterior.last_cov, &s.posterior.sigma),
            frozen_coupling: o.frozen_coupling,
        })
        .collect())
}

pub fn write_equivalence_csv<W: Write>(rows: &[EquivalenceRow], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "k,gradient_norm,second_step,prior_mean_delta,prior_cov_delta,post_mean_delta,post_cov_delta,frozen_coupling"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.index,
            r.gradient_norm,
            r.second_step,
            r.prior_mean_delta,
            r.prior_cov_delta,
            r.post_mean_delta,
            r.post_cov_delta,
            r.frozen_coupling
        )?;
    }
    Ok(())
}

/// Largest `‖∇J̃‖` relative to the starting gradient over all solves.
pub fn max_gradient_ratio(steps: &[OracleStep]) -> f64 {
    steps
        .iter()
        .flat_map(|s| [&s.prior, &s.posterior])
        .map(|sol| sol.gradient_norm_end / (1.0 + sol.gradient_norm_start))
        .fold(0.0, f64::max)
}
