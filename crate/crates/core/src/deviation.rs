//! The first deviation function `Lambda(theta, alpha)`, the Legendre
//! transform of the cumulant function, and what is built directly on it.

use crate::error::{CrpError, Result};
use crate::lattice_model::{JumpDistribution, TiltPoint};
use crate::numeric::Sym2;
use crate::second_deviation;

/// Residual tolerance on `grad A(lambda, mu) = (theta, alpha)`.
pub const SADDLE_TOLERANCE: f64 = 1e-12;
/// Newton iteration cap.
pub const SADDLE_MAX_ITER: usize = 60;
/// Tilt coordinates beyond this magnitude are treated as divergence.
pub const SADDLE_BOUND: f64 = 50.0;
/// Minimum distance kept from the finiteness boundary of `A`.
pub const BOUNDARY_GAP: f64 = 1e-9;

/// Saddle point `(lambda, mu)` solving `grad A = (theta, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleSolution {
    pub lambda: f64,
    pub mu: f64,
    pub theta: f64,
    pub alpha: f64,
    /// `Lambda(theta, alpha) = lambda theta + mu alpha - A(lambda, mu)`.
    pub value: f64,
    /// `Lambda''(theta, alpha)`, the inverse of `A''(lambda, mu)`.
    pub hess: Sym2,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimiser of `L(r) = r Lambda(theta / r, alpha / r)` over `r > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayMinimum {
    pub r_star: f64,
    /// `L(r_star)`, equal to `D(theta, alpha)`.
    pub value: f64,
    /// `L''(r_star)`.
    pub second: f64,
    pub theta_hat: f64,
    pub alpha_hat: f64,
    pub lambda_hat: f64,
    pub mu_hat: f64,
    /// `Lambda''` at `(theta_hat, alpha_hat)`.
    pub lambda_hess: Sym2,
}

/// Solves for the saddle point starting the Newton iteration at the origin.
pub fn solve_saddle(dist: &JumpDistribution, theta: f64, alpha: f64) -> Result<SaddleSolution> {
    solve_saddle_from(dist, theta, alpha, (0.0, 0.0))
}

fn outside(theta: f64, alpha: f64, reason: impl Into<String>) -> CrpError {
    CrpError::OutsideLambdaDomain {
        theta,
        alpha,
        reason: reason.into(),
    }
}

fn safely_inside(dist: &JumpDistribution, lambda: f64, mu: f64) -> bool {
    match dist.tail() {
        Some(t) => lambda < t.lambda_limit(mu) - BOUNDARY_GAP,
        None => lambda.is_finite() && mu.is_finite(),
    }
}

/// Damped Newton iteration from `start`; the step is halved until the
/// residual norm decreases.
pub fn solve_saddle_from(
    dist: &JumpDistribution,
    theta: f64,
    alpha: f64,
    start: (f64, f64),
) -> Result<SaddleSolution> {
    if !(theta > 0.0) || !alpha.is_finite() {
        return Err(outside(theta, alpha, "theta must be positive and finite"));
    }
    let start = if safely_inside(dist, start.0, start.1) {
        start
    } else {
        (0.0, 0.0)
    };
    let mut tp = dist.cgf(start.0, start.1)?;
    let residual = |tp: &TiltPoint| (tp.grad.0 - theta, tp.grad.1 - alpha);
    let mut res = residual(&tp);
    for iter in 0..=SADDLE_MAX_ITER {
        let res_inf = res.0.abs().max(res.1.abs());
        if res_inf < SADDLE_TOLERANCE {
            return finish(tp, theta, alpha, iter);
        }
        if iter == SADDLE_MAX_ITER {
            break;
        }
        let inv = tp
            .hess
            .inverse()
            .ok_or_else(|| outside(theta, alpha, "singular Hessian of A"))?;
        let (dl, dm) = inv.mul_vec(res);
        let norm = res.0.hypot(res.1);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let (l, m) = (tp.lambda - scale * dl, tp.mu - scale * dm);
            if safely_inside(dist, l, m) {
                if let Ok(cand) = dist.cgf(l, m) {
                    let r = residual(&cand);
                    if r.0.hypot(r.1) < norm {
                        accepted = Some((cand, r));
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cand, r)) => {
                tp = cand;
                res = r;
            }
            // No descent left: the residual sits at the rounding floor.
            None if res_inf < 1e3 * SADDLE_TOLERANCE => return finish(tp, theta, alpha, iter),
            None => return Err(outside(theta, alpha, "Newton line search stalled")),
        }
        if tp.lambda.abs() > SADDLE_BOUND || tp.mu.abs() > SADDLE_BOUND {
            return Err(outside(
                theta,
                alpha,
                format!(
                    "saddle iterate ({}, {}) left the box |lambda|, |mu| <= {SADDLE_BOUND}",
                    tp.lambda, tp.mu
                ),
            ));
        }
    }
    Err(outside(
        theta,
        alpha,
        format!("no convergence in {SADDLE_MAX_ITER} Newton iterations"),
    ))
}

fn finish(tp: TiltPoint, theta: f64, alpha: f64, iterations: usize) -> Result<SaddleSolution> {
    let hess = tp
        .hess
        .inverse()
        .ok_or_else(|| outside(theta, alpha, "singular Hessian of A"))?;
    Ok(SaddleSolution {
        lambda: tp.lambda,
        mu: tp.mu,
        theta,
        alpha,
        value: tp.lambda * theta + tp.mu * alpha - tp.value,
        hess,
        converged: true,
        iterations,
    })
}

/// `Lambda(theta, alpha)`.
pub fn lambda_fn(dist: &JumpDistribution, theta: f64, alpha: f64) -> Result<f64> {
    solve_saddle(dist, theta, alpha).map(|s| s.value)
}

/// Solves a sequence of points, warm-starting each from the previous
/// solution. A failed point restarts its successor from the origin.
pub fn solve_saddle_sweep(
    dist: &JumpDistribution,
    points: &[(f64, f64)],
) -> Vec<Result<SaddleSolution>> {
    let mut start = (0.0, 0.0);
    points
        .iter()
        .map(|&(theta, alpha)| {
            let sol = solve_saddle_from(dist, theta, alpha, start);
            start = match &sol {
                Ok(s) => (s.lambda, s.mu),
                Err(_) => (0.0, 0.0),
            };
            sol
        })
        .collect()
}

/// Minimises `r Lambda(theta / r, alpha / r)` in closed form through the
/// boundary tilt `(lambda(alpha / theta), mu(alpha / theta))`.
pub fn minimize_ray(dist: &JumpDistribution, theta: f64, alpha: f64) -> Result<RayMinimum> {
    if !(theta > 0.0) || !alpha.is_finite() {
        return Err(CrpError::OutsideCone {
            theta,
            alpha,
            reason: "theta must be positive".into(),
        });
    }
    let rp = second_deviation::rate_point(dist, alpha / theta).map_err(|e| match e {
        CrpError::OutsideAlphaDomain { .. } => CrpError::OutsideCone {
            theta,
            alpha,
            reason: e.to_string(),
        },
        other => other,
    })?;
    let tp = dist.cgf(rp.lambda_alpha, rp.mu_alpha)?;
    let (theta_hat, alpha_hat) = tp.grad;
    let lambda_hess = tp.hess.inverse().ok_or_else(|| CrpError::OutsideCone {
        theta,
        alpha,
        reason: "singular Hessian at the boundary tilt".into(),
    })?;
    let r_star = theta / theta_hat;
    let value = r_star * (rp.lambda_alpha * theta_hat + rp.mu_alpha * alpha_hat - tp.value);
    let second = lambda_hess.quad((theta_hat, alpha_hat)) / r_star;
    Ok(RayMinimum {
        r_star,
        value,
        second,
        theta_hat,
        alpha_hat,
        lambda_hat: rp.lambda_alpha,
        mu_hat: rp.mu_alpha,
        lambda_hess,
    })
}

/// Local limit approximation of `P(S_n = (t, x))`:
/// `C_1(gamma, beta) exp(-n Lambda(gamma, beta)) / n` with
/// `C_1 = sqrt(det Lambda'') / (2 pi)`.
pub fn clt_local(dist: &JumpDistribution, n: u64, t: i64, x: i64) -> Result<f64> {
    if n == 0 {
        return Err(outside(t as f64, x as f64, "n must be positive"));
    }
    let nf = n as f64;
    let sol = solve_saddle(dist, t as f64 / nf, x as f64 / nf)?;
    let c1 = sol.hess.det().sqrt() / (2.0 * std::f64::consts::PI);
    Ok(c1 * (-nf * sol.value).exp() / nf)
}
