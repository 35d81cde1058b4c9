//! Built-in models.

use crate::linalg::{Matrix, Vector};
use crate::model::{
    from_cle, AffineVariance, ContinuousDiscreteModel, DiscreteLinearModel, NonlinearModel,
    Propensity, ReactionNetwork,
};

/// `x⁺ = 1 + 0.99x + √(100 + x) v`, `y = x + w`, `Σv = Σw = 1`.
pub fn example_sec3() -> DiscreteLinearModel {
    DiscreteLinearModel::new(
        Vector::from_element(1, 1.0),
        Matrix::from_element(1, 1, 0.99),
        Matrix::from_element(1, 1, 1.0),
        AffineVariance::new(Matrix::from_row_slice(1, 2, &[100.0, 1.0])).expect("1x2"),
        Matrix::identity(1, 1),
        Matrix::identity(1, 1),
    )
    .expect("valid built-in model")
}

/// True initial state `x_1` of [`example_sec3`].
pub const EXAMPLE_SEC3_X1: f64 = 1.0;

/// Birth at rate 10, death at rate 0.1·x.
pub fn birth_death_network() -> ReactionNetwork {
    ReactionNetwork::new(
        vec![vec![1, -1]],
        vec![Propensity::affine(10.0, &[0.0]), Propensity::affine(0.0, &[0.1])],
    )
    .expect("valid network")
}

/// Chemical Langevin birth-death process observed at `t = 1, 2, …, 50`
/// with unit measurement noise.
pub fn birth_death_cle() -> ContinuousDiscreteModel {
    let dynamics = from_cle(&birth_death_network()).expect("single-species reactions");
    ContinuousDiscreteModel::new(
        dynamics,
        Matrix::from_element(1, 1, 1.0),
        Matrix::identity(1, 1),
        (1..=50).map(f64::from).collect(),
    )
    .expect("valid built-in model")
}

/// Stationary mean of the birth-death process, used as its initial state.
pub const BIRTH_DEATH_X0: f64 = 100.0;

/// `x⁺ = x + 0.1x(1 − x/100) + √x v` (with `g² = x` floored), `y = x + w`.
pub fn logistic() -> NonlinearModel {
    NonlinearModel::new(
        1,
        |x: &Vector| x.map(|v| v + 0.1 * v * (1.0 - v / 100.0)),
        |x: &Vector| x.clone(),
        Matrix::from_element(1, 1, 1.0),
        Matrix::identity(1, 1),
        Matrix::identity(1, 1),
    )
    .expect("valid built-in model")
    .with_jacobian(|x: &Vector| Matrix::from_element(1, 1, 1.1 - 0.002 * x[0]))
}

pub const LOGISTIC_X0: f64 = 50.0;

/// A named built-in model.
#[derive(Debug, Clone)]
pub enum BuiltinModel {
    Discrete(DiscreteLinearModel),
    Continuous(ContinuousDiscreteModel),
    Nonlinear(NonlinearModel),
}

#[derive(Debug, Clone)]
pub struct NamedModel {
    pub name: &'static str,
    pub description: &'static str,
    pub model: BuiltinModel,
    /// True initial state used when simulating.
    pub x0: Vector,
}

pub fn builtin_models() -> Vec<NamedModel> {
    vec![
        NamedModel {
            name: "example_sec3",
            description: "scalar linear model, g^2(x) = 100 + x, Sigma_v = Sigma_w = 1",
            model: BuiltinModel::Discrete(example_sec3()),
            x0: Vector::from_element(1, EXAMPLE_SEC3_X1),
        },
        NamedModel {
            name: "birth_death_cle",
            description: "chemical Langevin birth-death process, 50 unit-spaced samples",
            model: BuiltinModel::Continuous(birth_death_cle()),
            x0: Vector::from_element(1, BIRTH_DEATH_X0),
        },
        NamedModel {
            name: "logistic",
            description: "logistic drift x + 0.1x(1 - x/100), g^2(x) = x",
            model: BuiltinModel::Nonlinear(logistic()),
            x0: Vector::from_element(1, LOGISTIC_X0),
        },
    ]
}

pub fn builtin(name: &str) -> Option<NamedModel> {
    builtin_models().into_iter().find(|m| m.name == name)
}

pub fn builtin_names() -> Vec<&'static str> {
    builtin_models().iter().map(|m| m.name).collect()
}
