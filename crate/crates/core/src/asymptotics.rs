//! Local-theorem approximations for `P(Z(n) = x)` and for the renewal
//! measure `H({t} x {x})`, assembled from the deviation functions.
//!
//! Every estimate carries its factors separately; `value` is their product
//! and `log_value` the same quantity in log space, which stays finite when
//! `exp(-n D)` underflows.

use std::f64::consts::PI;

use crate::deviation::{minimize_ray, RayMinimum};
use crate::error::{Condition, CrpError, Result};
use crate::lattice_model::{CrpModel, JumpDistribution};
use crate::second_deviation::{self, domain, rate_point, RatePoint};

/// Which checks passed for an estimate. All are decided, none defaulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionFlags {
    pub in_domain: bool,
    /// `psi_1` is finite at the tilt point.
    pub heterogeneity_ok: bool,
    /// Passes trivially unless `alpha = 0`.
    pub zero_alpha_tail_ok: bool,
    /// `lambda(alpha) < lambda_plus`.
    pub beta_clear: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticEstimate {
    pub value: f64,
    pub log_value: f64,
    /// `n D(alpha)` or `n D(theta, alpha)`.
    pub exponent: f64,
    /// `C(alpha)` or `C_H(theta, alpha)`.
    pub prefactor: f64,
    pub psi1_factor: f64,
    /// `I(alpha)`; absent for renewal-measure estimates.
    pub i_factor: Option<f64>,
    pub n: u64,
    /// `(t, x)`; `t = n` for the process pmf.
    pub target: (i64, i64),
    pub conditions: ConditionFlags,
}

impl AsymptoticEstimate {
    fn compose(
        psi1: f64,
        prefactor: f64,
        i_factor: Option<f64>,
        exponent: f64,
        n: u64,
    ) -> (f64, f64) {
        let i = i_factor.unwrap_or(1.0);
        let sqrt_n = (n as f64).sqrt();
        let value = psi1 * prefactor * i * (-exponent).exp() / sqrt_n;
        let log_value = psi1.ln() + prefactor.ln() + i.ln() - exponent - sqrt_n.ln();
        (value, log_value)
    }

    /// Recomputes `value` from the stored factors.
    pub fn recompose(&self) -> f64 {
        Self::compose(
            self.psi1_factor,
            self.prefactor,
            self.i_factor,
            self.exponent,
            self.n,
        )
        .0
    }
}

/// `C_H(theta, alpha) = sqrt(r / (2 pi) |Lambda''| / ((theta, alpha) Lambda'' (theta, alpha)^T))`
/// with `Lambda''` taken at `(theta_hat, alpha_hat)`.
pub fn c_h(dist: &JumpDistribution, theta: f64, alpha: f64) -> Result<f64> {
    let ray = minimize_ray(dist, theta, alpha)?;
    Ok(c_h_from_ray(&ray, theta, alpha))
}

fn c_h_from_ray(ray: &RayMinimum, theta: f64, alpha: f64) -> f64 {
    let det = ray.lambda_hess.det();
    let quad = ray.lambda_hess.quad((theta, alpha));
    (ray.r_star / (2.0 * PI) * det / quad).sqrt()
}

/// `I(alpha) = sum_{m >= 1} exp(lambda(alpha) m) P(tau >= m)`.
pub fn i_alpha(dist: &JumpDistribution, alpha: f64) -> Result<f64> {
    let rp = rate_point(dist, alpha)?;
    i_from_rate(dist, &rp)
}

fn divergence(dist: &JumpDistribution, rp: &RatePoint) -> CrpError {
    let summary = domain(dist);
    let (beta_minus, beta_plus) = summary.beta_interval().unwrap_or((rp.alpha, rp.alpha));
    CrpError::Divergent {
        alpha: rp.alpha,
        lambda_alpha: rp.lambda_alpha,
        lambda_plus: dist.lambda_plus(),
        beta_minus,
        beta_plus,
    }
}

/// `I` as a function of the tilt `lambda` alone.
pub fn i_of_lambda(dist: &JumpDistribution, lambda: f64) -> Option<f64> {
    if lambda >= dist.lambda_plus() {
        return None;
    }
    let finite_end = match dist.tail() {
        Some(t) => dist.max_atom_t().max(t.k0),
        None => dist.max_atom_t(),
    };
    let mut sum = crate::numeric::CompensatedSum::new();
    for m in 1..=finite_end {
        sum += (lambda * m as f64).exp() * dist.survival(m);
    }
    if let Some(t) = dist.tail() {
        // For m > finite_end, P(tau >= m) = c q^m / (1 - q).
        let log_r = t.q.ln() + lambda;
        let r = log_r.exp();
        let m0 = (finite_end + 1) as f64;
        sum += t.c / (1.0 - t.q) * (m0 * log_r).exp() / (-log_r.exp_m1());
        debug_assert!(r < 1.0);
    }
    Some(sum.value())
}

fn i_from_rate(dist: &JumpDistribution, rp: &RatePoint) -> Result<f64> {
    i_of_lambda(dist, rp.lambda_alpha).ok_or_else(|| divergence(dist, rp))
}

fn heterogeneity(model: &CrpModel, lambda: f64, mu: f64) -> Result<f64> {
    model
        .first()
        .cgf(lambda, mu)
        .map(|tp| tp.value.exp())
        .map_err(|_| CrpError::ConditionViolated {
            condition: Condition::Heterogeneity,
            detail: format!(
                "psi_1 is infinite at the tilt (lambda, mu) = ({lambda}, {mu}) \
                 (first-jump lambda_plus = {})",
                model.first().lambda_plus()
            ),
        })
}

/// Local theorem for `P(Z(n) = x)`:
/// `psi_1(lambda(alpha), mu(alpha)) C(alpha) I(alpha) exp(-n D(alpha)) / sqrt(n)`.
pub fn approx_crp_pmf(model: &CrpModel, n: u64, x: i64) -> Result<AsymptoticEstimate> {
    model.ensure_arithmetic()?;
    let step = model.step();
    if n == 0 {
        return Err(CrpError::InvalidModel("n must be positive".into()));
    }
    let alpha = x as f64 / n as f64;
    let rp = rate_point(step, alpha)?;
    if !rp.below_lambda_plus {
        return Err(divergence(step, &rp));
    }
    let psi1 = heterogeneity(model, rp.lambda_alpha, rp.mu_alpha)?;
    if x == 0 {
        let lp1 = model.first().lambda_plus();
        if !(lp1 > rp.d) {
            return Err(CrpError::ConditionViolated {
                condition: Condition::ZeroAlphaTail,
                detail: format!(
                    "first-jump lambda_plus = {lp1} does not exceed D(0) = {}",
                    rp.d
                ),
            });
        }
    }
    let ray = minimize_ray(step, 1.0, alpha)?;
    let prefactor = c_h_from_ray(&ray, 1.0, alpha);
    let i = i_from_rate(step, &rp)?;
    let exponent = n as f64 * rp.d;
    let (value, log_value) = AsymptoticEstimate::compose(psi1, prefactor, Some(i), exponent, n);
    Ok(AsymptoticEstimate {
        value,
        log_value,
        exponent,
        prefactor,
        psi1_factor: psi1,
        i_factor: Some(i),
        n,
        target: (n as i64, x),
        conditions: ConditionFlags {
            in_domain: true,
            heterogeneity_ok: true,
            zero_alpha_tail_ok: true,
            beta_clear: true,
        },
    })
}

/// Central-zone form `exp(-n D(alpha)) / (sigma sqrt(2 pi n))`.
pub fn approx_clt_zone(model: &CrpModel, n: u64, x: i64) -> Result<f64> {
    model.ensure_arithmetic()?;
    if n == 0 {
        return Err(CrpError::InvalidModel("n must be positive".into()));
    }
    let step = model.step();
    let d = second_deviation::d_of_alpha(step, x as f64 / n as f64)?;
    let sigma = step.moments().sigma2.sqrt();
    Ok((-(n as f64) * d).exp() / (sigma * (2.0 * PI * n as f64).sqrt()))
}

/// Local theorem for the renewal measure:
/// `psi_1(lambda_hat, mu_hat) C_H(theta, alpha) exp(-n D(theta, alpha)) / sqrt(n)`.
pub fn approx_renewal(model: &CrpModel, n: u64, t: i64, x: i64) -> Result<AsymptoticEstimate> {
    model.ensure_arithmetic()?;
    if n == 0 {
        return Err(CrpError::InvalidModel("n must be positive".into()));
    }
    let nf = n as f64;
    let (theta, alpha) = (t as f64 / nf, x as f64 / nf);
    let ray = minimize_ray(model.step(), theta, alpha)?;
    let psi1 = heterogeneity(model, ray.lambda_hat, ray.mu_hat)?;
    let prefactor = c_h_from_ray(&ray, theta, alpha);
    let exponent = nf * ray.value;
    let (value, log_value) = AsymptoticEstimate::compose(psi1, prefactor, None, exponent, n);
    Ok(AsymptoticEstimate {
        value,
        log_value,
        exponent,
        prefactor,
        psi1_factor: psi1,
        i_factor: None,
        n,
        target: (t, x),
        conditions: ConditionFlags {
            in_domain: true,
            heterogeneity_ok: true,
            zero_alpha_tail_ok: true,
            beta_clear: ray.lambda_hat < model.step().lambda_plus(),
        },
    })
}

/// Residuals of the two drift-point identities: `C(a) I(a) sigma sqrt(2 pi) = 1`
/// and `sigma^2 D''(a) = 1`.
pub fn drift_identities(dist: &JumpDistribution) -> Result<(f64, f64)> {
    let m = dist.moments();
    let sigma = m.sigma2.sqrt();
    let c = c_h(dist, 1.0, m.a)?;
    let i = i_alpha(dist, m.a)?;
    let rp = rate_point(dist, m.a)?;
    Ok((
        (c * i * sigma * (2.0 * PI).sqrt() - 1.0).abs(),
        (m.sigma2 * rp.d2 - 1.0).abs(),
    ))
}
