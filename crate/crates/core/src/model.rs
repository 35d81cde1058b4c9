//! System models with diagonal, state-dependent noise gains.
//!
//! The linear family is `x⁺ = A0 + A1 x + G(x) v`, `y = C x + w`, where
//! `G(x) = diag(g_1(x), …, g_n(x))` and each `g_i(x)²` is affine in `x`.
//! The nonlinear family replaces the drift by an arbitrary map `f` and lifts
//! the affine restriction on `g_i²`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{is_diagonal, Matrix, Vector};

/// Floor applied to `g_i(x)²` before taking the square root.
pub const GAIN_SQ_FLOOR: f64 = 1e-12;

/// Affine coefficients of the squared gains: `g_i(x)² = c_i0 + Σ_j c_ij x_j`.
///
/// Stored as an `n × (n+1)` matrix whose first column holds the offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineVariance {
    coeffs: Matrix,
}

impl AffineVariance {
    pub fn new(coeffs: Matrix) -> Result<Self> {
        if coeffs.ncols() != coeffs.nrows() + 1 {
            return Err(Error::Dimension(format!(
                "gsq must be n x (n+1), got {} x {}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        Ok(Self { coeffs })
    }

    /// Build from offsets `c_i0` and the slope matrix `c_ij`.
    pub fn from_parts(offset: &Vector, slope: &Matrix) -> Result<Self> {
        let n = offset.len();
        if slope.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "gsq slope must be {n} x {n}, got {:?}",
                slope.shape()
            )));
        }
        let mut coeffs = Matrix::zeros(n, n + 1);
        coeffs.set_column(0, offset);
        coeffs.view_mut((0, 1), (n, n)).copy_from(slope);
        Ok(Self { coeffs })
    }

    /// State-independent squared gains.
    pub fn constant(values: &[f64]) -> Self {
        let n = values.len();
        let mut coeffs = Matrix::zeros(n, n + 1);
        for (i, &v) in values.iter().enumerate() {
            coeffs[(i, 0)] = v;
        }
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn offset(&self) -> Vector {
        self.coeffs.column(0).into_owned()
    }

    pub fn slope(&self) -> Matrix {
        let n = self.dim();
        self.coeffs.view((0, 1), (n, n)).into_owned()
    }

    /// Unclamped `g_i(x)²`.
    pub fn eval_sq(&self, x: &Vector) -> Vector {
        self.offset() + self.slope() * x
    }

    pub fn is_constant(&self) -> bool {
        let n = self.dim();
        self.coeffs.view((0, 1), (n, n)).iter().all(|&c| c == 0.0)
    }

    /// Multiply every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: &self.coeffs * factor,
        }
    }
}

/// Diagonal of `G(x)` plus whether any entry hit the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEval {
    pub diag: Vector,
    pub clamped: bool,
    /// `g_i(x)²` before flooring.
    pub squared: Vector,
}

impl GainEval {
    /// Turn squared gains into gains, flooring each at [`GAIN_SQ_FLOOR`].
    pub fn from_squared(gsq: &Vector) -> Self {
        let mut clamped = false;
        let diag = gsq.map(|v| {
            if v >= GAIN_SQ_FLOOR {
                v.sqrt()
            } else {
                clamped = true;
                GAIN_SQ_FLOOR.sqrt()
            }
        });
        Self {
            diag,
            clamped,
            squared: gsq.clone(),
        }
    }

    pub fn matrix(&self) -> Matrix {
        Matrix::from_diagonal(&self.diag)
    }

    /// `G Σv G` for a diagonal `Σv`.
    pub fn scale_noise(&self, sigma_v: &Matrix) -> Matrix {
        let n = self.diag.len();
        Matrix::from_fn(n, n, |i, j| self.diag[i] * sigma_v[(i, j)] * self.diag[j])
    }
}

/// `G(x) = diag(√max(g_i(x)², ε))`.
pub fn eval_g(gsq: &AffineVariance, x: &Vector) -> GainEval {
    GainEval::from_squared(&gsq.eval_sq(x))
}

/// Hypotheses a linear model can fail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Dimensions(String),
    SigmaVNotDiagonal,
    SigmaVNegative,
    SigmaWNotSymmetric,
    SigmaWNotPositiveDefinite,
    NonFinite(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimensions(d) => write!(f, "dimension mismatch: {d}"),
            Violation::SigmaVNotDiagonal => f.write_str("Sigma_v not diagonal"),
            Violation::SigmaVNegative => f.write_str("Sigma_v has negative entries"),
            Violation::SigmaWNotSymmetric => f.write_str("Sigma_w not symmetric"),
            Violation::SigmaWNotPositiveDefinite => f.write_str("Sigma_w not positive definite"),
            Violation::NonFinite(what) => write!(f, "{what} has non-finite entries"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn reasons(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }

    fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidModel(self.reasons().join("; ")))
        }
    }
}

fn check_noise(sigma_v: &Matrix, sigma_w: &Matrix, out: &mut Vec<Violation>) {
    if sigma_v.is_square() {
        if !is_diagonal(sigma_v) {
            out.push(Violation::SigmaVNotDiagonal);
        }
        if sigma_v.diagonal().iter().any(|&v| v < 0.0) {
            out.push(Violation::SigmaVNegative);
        }
    }
    if sigma_w.is_square() {
        if sigma_w != &sigma_w.transpose() {
            out.push(Violation::SigmaWNotSymmetric);
        } else if sigma_w.nrows() == 0 || sigma_w.clone().cholesky().is_none() {
            out.push(Violation::SigmaWNotPositiveDefinite);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_dims(
    n: usize,
    a0: &Vector,
    a1: &Matrix,
    c: &Matrix,
    gsq: &AffineVariance,
    sigma_v: &Matrix,
    sigma_w: &Matrix,
    out: &mut Vec<Violation>,
) {
    let m = c.nrows();
    let mut bad = |what: &str, got: (usize, usize), want: (usize, usize)| {
        if got != want {
            out.push(Violation::Dimensions(format!(
                "{what} is {}x{}, expected {}x{}",
                got.0, got.1, want.0, want.1
            )));
        }
    };
    bad("A0", (a0.len(), 1), (n, 1));
    bad("A1", a1.shape(), (n, n));
    bad("C", c.shape(), (m, n));
    bad("gsq", gsq.coeffs().shape(), (n, n + 1));
    bad("Sigma_v", sigma_v.shape(), (n, n));
    bad("Sigma_w", sigma_w.shape(), (m, m));
}

/// Linear drift with affine squared gains.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLinearModel {
    pub a0: Vector,
    pub a1: Matrix,
    pub c: Matrix,
    pub gsq: AffineVariance,
    pub sigma_v: Matrix,
    pub sigma_w: Matrix,
}

impl DiscreteLinearModel {
    /// Construct and validate.
    pub fn new(
        a0: Vector,
        a1: Matrix,
        c: Matrix,
        gsq: AffineVariance,
        sigma_v: Matrix,
        sigma_w: Matrix,
    ) -> Result<Self> {
        let model = Self {
            a0,
            a1,
            c,
            gsq,
            sigma_v,
            sigma_w,
        };
        validate_model(&model).into_result()?;
        Ok(model)
    }

    pub fn state_dim(&self) -> usize {
        self.a0.len()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// Check the hypotheses of the state-dependent-noise filter. Never fails;
/// every violated hypothesis is listed in the report.
pub fn validate_model(model: &DiscreteLinearModel) -> ValidationReport {
    let mut v = Vec::new();
    check_dims(
        model.a0.len(),
        &model.a0,
        &model.a1,
        &model.c,
        &model.gsq,
        &model.sigma_v,
        &model.sigma_w,
        &mut v,
    );
    check_noise(&model.sigma_v, &model.sigma_w, &mut v);
    let finite = |m: &Matrix| m.iter().all(|x| x.is_finite());
    if !model.a0.iter().all(|x| x.is_finite()) {
        v.push(Violation::NonFinite("A0"));
    }
    if !finite(&model.a1) {
        v.push(Violation::NonFinite("A1"));
    }
    if !finite(&model.c) {
        v.push(Violation::NonFinite("C"));
    }
    if !finite(model.gsq.coeffs()) {
        v.push(Violation::NonFinite("gsq"));
    }
    ValidationReport { violations: v }
}

type VecFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type MatFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

/// Nonlinear drift `f` with arbitrary diagonal gains.
///
/// The gain map is supplied through its squares `g_i(x)²`, which are floored
/// exactly as in [`eval_g`]. Without an explicit Jacobian, central
/// differences are used.
#[derive(Clone)]
pub struct NonlinearModel {
    n: usize,
    drift: Arc<VecFn>,
    jacobian: Option<Arc<MatFn>>,
    gain_sq: Arc<VecFn>,
    pub c: Matrix,
    pub sigma_v: Matrix,
    pub sigma_w: Matrix,
}

impl fmt::Debug for NonlinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearModel")
            .field("n", &self.n)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("c", &self.c)
            .field("sigma_v", &self.sigma_v)
            .field("sigma_w", &self.sigma_w)
            .finish()
    }
}

impl NonlinearModel {
    pub fn new<F, G>(
        n: usize,
        drift: F,
        gain_sq: G,
        c: Matrix,
        sigma_v: Matrix,
        sigma_w: Matrix,
    ) -> Result<Self>
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        let mut v = Vec::new();
        if c.ncols() != n {
            v.push(Violation::Dimensions(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if sigma_v.shape() != (n, n) {
            v.push(Violation::Dimensions("Sigma_v".into()));
        }
        if sigma_w.shape() != (c.nrows(), c.nrows()) {
            v.push(Violation::Dimensions("Sigma_w".into()));
        }
        check_noise(&sigma_v, &sigma_w, &mut v);
        ValidationReport { violations: v }.into_result()?;
        Ok(Self {
            n,
            drift: Arc::new(drift),
            jacobian: None,
            gain_sq: Arc::new(gain_sq),
            c,
            sigma_v,
            sigma_w,
        })
    }

    /// Supply an analytic Jacobian of the drift.
    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Drop any analytic Jacobian so the finite-difference fallback is used.
    pub fn without_jacobian(mut self) -> Self {
        self.jacobian = None;
        self
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// The nonlinear view of a linear model.
    pub fn from_linear(model: &DiscreteLinearModel) -> Self {
        let (a0, a1) = (model.a0.clone(), model.a1.clone());
        let a1j = model.a1.clone();
        let gsq = model.gsq.clone();
        Self {
            n: model.state_dim(),
            drift: Arc::new(move |x: &Vector| &a0 + &a1 * x),
            jacobian: Some(Arc::new(move |_: &Vector| a1j.clone())),
            gain_sq: Arc::new(move |x: &Vector| gsq.eval_sq(x)),
            c: model.c.clone(),
            sigma_v: model.sigma_v.clone(),
            sigma_w: model.sigma_w.clone(),
        }
    }

    pub fn gain_sq(&self, x: &Vector) -> Vector {
        (self.gain_sq)(x)
    }
}

/// Central-difference Jacobian with per-coordinate step `1e-5·(1+|x_j|)`.
pub fn central_difference_jacobian<F>(f: F, x: &Vector) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = 1e-5 * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        cols.push((fp - fm) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Matrix::from_fn(rows, n, |i, j| cols[j][i])
}

/// What the filters and the oracle need from a model.
pub trait StateDynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn drift(&self, x: &Vector) -> Vector;
    fn drift_jacobian(&self, x: &Vector) -> Matrix;
    fn gain(&self, x: &Vector) -> GainEval;
    fn output_matrix(&self) -> &Matrix;
    fn process_noise(&self) -> &Matrix;
    fn measurement_noise(&self) -> &Matrix;

    /// `∂(1/g_i)/∂x_j` at `x`; zero on clamped entries.
    fn inverse_gain_jacobian(&self, x: &Vector) -> Matrix {
        let base = self.gain(x);
        let mut jac = central_difference_jacobian(|p| self.gain(p).diag.map(|g| 1.0 / g), x);
        for (i, &g) in base.diag.iter().enumerate() {
            if g <= GAIN_SQ_FLOOR.sqrt() {
                jac.row_mut(i).fill(0.0);
            }
        }
        jac
    }
}

impl StateDynamics for DiscreteLinearModel {
    fn state_dim(&self) -> usize {
        self.a0.len()
    }
    fn drift(&self, x: &Vector) -> Vector {
        &self.a0 + &self.a1 * x
    }
    fn drift_jacobian(&self, _x: &Vector) -> Matrix {
        self.a1.clone()
    }
    fn gain(&self, x: &Vector) -> GainEval {
        eval_g(&self.gsq, x)
    }
    fn output_matrix(&self) -> &Matrix {
        &self.c
    }
    fn process_noise(&self) -> &Matrix {
        &self.sigma_v
    }
    fn measurement_noise(&self) -> &Matrix {
        &self.sigma_w
    }
    fn inverse_gain_jacobian(&self, x: &Vector) -> Matrix {
        // d/dx (g²)^{-1/2} = -½ (g²)^{-3/2} ∂g²/∂x
        let sq = self.gsq.eval_sq(x);
        let slope = self.gsq.slope();
        let n = self.state_dim();
        Matrix::from_fn(n, n, |i, j| {
            if sq[i] >= GAIN_SQ_FLOOR {
                -0.5 * sq[i].powf(-1.5) * slope[(i, j)]
            } else {
                0.0
            }
        })
    }
}

impl StateDynamics for NonlinearModel {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn drift(&self, x: &Vector) -> Vector {
        (self.drift)(x)
    }
    fn drift_jacobian(&self, x: &Vector) -> Matrix {
        match &self.jacobian {
            Some(j) => j(x),
            None => central_difference_jacobian(|p| (self.drift)(p), x),
        }
    }
    fn gain(&self, x: &Vector) -> GainEval {
        GainEval::from_squared(&(self.gain_sq)(x))
    }
    fn output_matrix(&self) -> &Matrix {
        &self.c
    }
    fn process_noise(&self) -> &Matrix {
        &self.sigma_v
    }
    fn measurement_noise(&self) -> &Matrix {
        &self.sigma_w
    }
}

/// Either model family, for code that accepts both.
#[derive(Debug, Clone)]
pub enum SystemModel {
    Linear(DiscreteLinearModel),
    Nonlinear(NonlinearModel),
}

impl SystemModel {
    pub fn dynamics(&self) -> &dyn StateDynamics {
        match self {
            SystemModel::Linear(m) => m,
            SystemModel::Nonlinear(m) => m,
        }
    }
}

/// Continuous-time drift and diffusion: `dx = (A0 + A1 x) dt + G(x) dβ`,
/// with `dβ` of intensity `Σv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDynamics {
    pub a0: Vector,
    pub a1: Matrix,
    pub gsq: AffineVariance,
    pub sigma_v: Matrix,
}

impl ContinuousDynamics {
    pub fn state_dim(&self) -> usize {
        self.a0.len()
    }

    pub fn drift(&self, x: &Vector) -> Vector {
        &self.a0 + &self.a1 * x
    }
}

/// Continuous dynamics sampled through `y_k = C x(t_k) + w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDiscreteModel {
    pub dynamics: ContinuousDynamics,
    pub c: Matrix,
    pub sigma_w: Matrix,
    pub sample_times: Vec<f64>,
}

impl ContinuousDiscreteModel {
    pub fn new(
        dynamics: ContinuousDynamics,
        c: Matrix,
        sigma_w: Matrix,
        sample_times: Vec<f64>,
    ) -> Result<Self> {
        let model = Self {
            dynamics,
            c,
            sigma_w,
            sample_times,
        };
        let mut report = validate_model(&model.as_discrete_shape());
        if model.sample_times.is_empty() {
            report
                .violations
                .push(Violation::Dimensions("no sample times".into()));
        }
        if model.sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            report
                .violations
                .push(Violation::Dimensions("sample times not strictly increasing".into()));
        }
        if model.sample_times.iter().any(|t| !t.is_finite()) {
            report.violations.push(Violation::NonFinite("sample_times"));
        }
        report.into_result()?;
        Ok(model)
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    /// The same coefficients viewed as a discrete model (for validation).
    pub fn as_discrete_shape(&self) -> DiscreteLinearModel {
        DiscreteLinearModel {
            a0: self.dynamics.a0.clone(),
            a1: self.dynamics.a1.clone(),
            c: self.c.clone(),
            gsq: self.dynamics.gsq.clone(),
            sigma_v: self.dynamics.sigma_v.clone(),
            sigma_w: self.sigma_w.clone(),
        }
    }

    /// Smallest gap between consecutive sample instants (∞ for one sample).
    pub fn min_gap(&self) -> f64 {
        self.sample_times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// One monomial `coefficient · Π x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

/// Reaction propensity as a polynomial in the species counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Propensity {
    pub terms: Vec<Monomial>,
}

impl Propensity {
    /// `b0 + Σ_i b_i x_i`
    pub fn affine(b0: f64, slopes: &[f64]) -> Self {
        let n = slopes.len();
        let mut terms = vec![Monomial {
            coefficient: b0,
            powers: vec![0; n],
        }];
        for (i, &b) in slopes.iter().enumerate() {
            let mut powers = vec![0; n];
            powers[i] = 1;
            terms.push(Monomial {
                coefficient: b,
                powers,
            });
        }
        Self { terms }
    }

    /// `rate · Π x_i^{powers_i}`
    pub fn mass_action(rate: f64, powers: Vec<u32>) -> Self {
        Self {
            terms: vec![Monomial {
                coefficient: rate,
                powers,
            }],
        }
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient
                    * t.powers
                        .iter()
                        .zip(x.iter())
                        .map(|(&p, &xi)| xi.powi(p as i32))
                        .product::<f64>()
            })
            .sum()
    }

    /// `(b0, [b_1..b_n])` if every term has total degree ≤ 1.
    pub fn affine_coefficients(&self, n: usize) -> Option<(f64, Vec<f64>)> {
        let mut b0 = 0.0;
        let mut b = vec![0.0; n];
        for t in &self.terms {
            if t.powers.len() != n {
                return None;
            }
            let degree: u32 = t.powers.iter().sum();
            match degree {
                0 => b0 += t.coefficient,
                1 => {
                    let i = t.powers.iter().position(|&p| p == 1)?;
                    b[i] += t.coefficient;
                }
                _ => return None,
            }
        }
        Some((b0, b))
    }
}

/// Stoichiometry (`n` species × `M` reactions) and per-reaction propensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    stoichiometry: Vec<Vec<i32>>,
    propensities: Vec<Propensity>,
}

impl ReactionNetwork {
    /// `stoichiometry[i][j]` is the change of species `i` when reaction `j` fires.
    pub fn new(stoichiometry: Vec<Vec<i32>>, propensities: Vec<Propensity>) -> Result<Self> {
        let m = propensities.len();
        if stoichiometry.iter().any(|row| row.len() != m) {
            return Err(Error::Dimension(format!(
                "stoichiometry rows must have {m} entries"
            )));
        }
        let n = stoichiometry.len();
        for (j, p) in propensities.iter().enumerate() {
            if p.affine_coefficients(n).is_none() {
                return Err(Error::NonAffine {
                    reaction: j,
                    detail: describe_nonaffine(p, n),
                });
            }
        }
        Ok(Self {
            stoichiometry,
            propensities,
        })
    }

    pub fn species(&self) -> usize {
        self.stoichiometry.len()
    }

    pub fn reactions(&self) -> usize {
        self.propensities.len()
    }

    pub fn nu(&self, species: usize, reaction: usize) -> i32 {
        self.stoichiometry[species][reaction]
    }

    pub fn propensity(&self, reaction: usize) -> &Propensity {
        &self.propensities[reaction]
    }
}

fn describe_nonaffine(p: &Propensity, n: usize) -> String {
    match p.terms.iter().find(|t| t.powers.len() != n) {
        Some(_) => format!("monomial arity differs from species count {n}"),
        None => {
            let deg = p
                .terms
                .iter()
                .map(|t| t.powers.iter().sum::<u32>())
                .max()
                .unwrap_or(0);
            format!("total degree {deg}")
        }
    }
}

/// Chemical Langevin dynamics of a network whose reactions each change a
/// single species. Channel variances are summed per species, so
/// `g_i(x)² = Σ_j ν_ij² a_j(x)` with unit-intensity noise.
pub fn from_cle(net: &ReactionNetwork) -> Result<ContinuousDynamics> {
    let n = net.species();
    for j in 0..net.reactions() {
        if (0..n).filter(|&i| net.nu(i, j) != 0).count() > 1 {
            return Err(Error::NonDiagonalizable { reaction: j });
        }
    }
    let mut a0 = Vector::zeros(n);
    let mut a1 = Matrix::zeros(n, n);
    let mut gsq = Matrix::zeros(n, n + 1);
    for j in 0..net.reactions() {
        let (b0, b) = net
            .propensity(j)
            .affine_coefficients(n)
            .ok_or_else(|| Error::NonAffine {
                reaction: j,
                detail: describe_nonaffine(net.propensity(j), n),
            })?;
        for i in 0..n {
            let nu = f64::from(net.nu(i, j));
            if nu == 0.0 {
                continue;
            }
            a0[i] += nu * b0;
            gsq[(i, 0)] += nu * nu * b0;
            for k in 0..n {
                a1[(i, k)] += nu * b[k];
                gsq[(i, k + 1)] += nu * nu * b[k];
            }
        }
    }
    Ok(ContinuousDynamics {
        a0,
        a1,
        gsq: AffineVariance::new(gsq)?,
        sigma_v: Matrix::identity(n, n),
    })
}
