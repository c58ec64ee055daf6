use std::fmt;

use thiserror::Error;

/// A structural or theorem condition that an asymptotic formula requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// The step law is not confined to a proper sublattice or a line.
    Arithmetic,
    /// The first-jump transform is finite at the tilt point.
    Heterogeneity,
    /// `P(tau_1 >= n)` decays faster than `exp(-n D(0)) / sqrt(n)`.
    ZeroAlphaTail,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Arithmetic => f.write_str("arithmetic condition [Z]"),
            Condition::Heterogeneity => f.write_str("admissible heterogeneity condition"),
            Condition::ZeroAlphaTail => f.write_str("first-jump tail condition at alpha = 0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(
        "(lambda, mu) = ({lambda}, {mu}) is outside the finiteness domain of the cumulant \
         function (lambda_plus = {lambda_plus})"
    )]
    OutsideCumulantDomain {
        lambda: f64,
        mu: f64,
        lambda_plus: f64,
    },

    #[error(
        "(theta, alpha) = ({theta}, {alpha}) is outside the analyticity domain of Lambda: {reason}"
    )]
    OutsideLambdaDomain {
        theta: f64,
        alpha: f64,
        reason: String,
    },

    #[error("alpha = {alpha} is outside (alpha_-, alpha_+) = ({alpha_minus}, {alpha_plus}) (guard band {guard})")]
    OutsideAlphaDomain {
        alpha: f64,
        alpha_minus: f64,
        alpha_plus: f64,
        guard: f64,
    },

    #[error("mu = {mu} is outside (mu_-, mu_+): {reason}")]
    OutsideMuDomain { mu: f64, reason: String },

    #[error("(theta, alpha) = ({theta}, {alpha}) is outside the cone D: {reason}")]
    OutsideCone {
        theta: f64,
        alpha: f64,
        reason: String,
    },

    #[error(
        "I(alpha) diverges at alpha = {alpha}: lambda(alpha) = {lambda_alpha} >= lambda_plus = \
         {lambda_plus}; alpha lies in the beta-interval [{beta_minus}, {beta_plus}]"
    )]
    Divergent {
        alpha: f64,
        lambda_alpha: f64,
        lambda_plus: f64,
        beta_minus: f64,
        beta_plus: f64,
    },

    #[error("{condition} violated: {detail}")]
    ConditionViolated {
        condition: Condition,
        detail: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CrpError {
    /// True for errors that report a point outside some analyticity or
    /// finiteness domain.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            CrpError::OutsideCumulantDomain { .. }
                | CrpError::OutsideLambdaDomain { .. }
                | CrpError::OutsideAlphaDomain { .. }
                | CrpError::OutsideMuDomain { .. }
                | CrpError::OutsideCone { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, CrpError>;
