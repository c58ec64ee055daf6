//! The second deviation function.
//!
//! For each `mu` the zero level `A(lambda, mu) = 0` has a unique root
//! `lambda = -A(mu)` because `A` increases in `lambda` (`tau >= 1`).
//! `D(alpha)` is the Legendre transform of `A(mu)`, and
//! `D(theta, alpha) = theta D(alpha / theta)` on the cone `theta > 0`.
//!
//! No memoisation: every call recomputes from the distribution.

use crate::error::{CrpError, Result};
use crate::lattice_model::{JumpDistribution, TiltPoint};

/// Guard band kept inside `(alpha_-, alpha_+)`.
pub const ALPHA_GUARD: f64 = 1e-6;
/// Root residual for `A(lambda, mu) = 0`.
pub const ROOT_TOLERANCE: f64 = 1e-12;
/// `mu` at which `A'(mu)` is compared against the support slopes.
pub const SLOPE_PROBE_MU: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub alpha: f64,
    pub mu_alpha: f64,
    /// `lambda(alpha) = -A(mu(alpha))`.
    pub lambda_alpha: f64,
    /// `D(alpha) = lambda(alpha) + alpha mu(alpha)`.
    pub d: f64,
    /// `D'(alpha) = mu(alpha)`.
    pub d1: f64,
    /// `D''(alpha) = 1 / A''(mu(alpha))`.
    pub d2: f64,
    pub in_domain: bool,
    /// `lambda(alpha) < lambda_plus`, i.e. alpha is off the beta-interval.
    pub below_lambda_plus: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSummary {
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub lambda_plus: f64,
    pub beta_minus: Option<f64>,
    pub beta_plus: Option<f64>,
    /// `D(0)` when zero lies inside `(alpha_-, alpha_+)`.
    pub d0: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl DomainSummary {
    pub fn beta_interval(&self) -> Option<(f64, f64)> {
        self.beta_minus.zip(self.beta_plus)
    }

    /// True when `alpha` falls inside the closed beta-interval.
    pub fn in_beta_interval(&self, alpha: f64) -> bool {
        self.beta_interval()
            .is_some_and(|(lo, hi)| alpha >= lo && alpha <= hi)
    }
}

/// Gradient and value of `D(theta, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeValue {
    pub value: f64,
    /// `(lambda(alpha / theta), mu(alpha / theta))`.
    pub grad: (f64, f64),
}

fn mu_error(mu: f64, reason: impl Into<String>) -> CrpError {
    CrpError::OutsideMuDomain {
        mu,
        reason: reason.into(),
    }
}

/// Root of `A(lambda, mu) = 0` in `lambda`, with the cumulant data there.
pub fn boundary_point(dist: &JumpDistribution, mu: f64) -> Result<TiltPoint> {
    if !mu.is_finite() {
        return Err(mu_error(mu, "mu must be finite"));
    }
    let limit = dist.tail().map(|t| t.lambda_limit(mu));
    // Newton on a convex increasing function converges monotonically from
    // any point where it is non-negative, so first find such a point.
    let start = limit.map_or(0.0, |lim| (lim - 1.0).min(0.0));
    let mut tp = dist.cgf(start, mu)?;
    if tp.value < 0.0 {
        match limit {
            // A grows without bound at the wall.
            Some(lim) => {
                let mut gap = 0.5 * (lim - start);
                loop {
                    if lim - gap >= lim {
                        return Err(mu_error(mu, "root requires lambda >= lambda_plus"));
                    }
                    let cand = dist.cgf(lim - gap, mu)?;
                    if cand.value >= 0.0 {
                        tp = cand;
                        break;
                    }
                    gap *= 0.5;
                }
            }
            None => {
                let mut lambda = 1.0;
                loop {
                    let cand = dist.cgf(lambda, mu)?;
                    if cand.value >= 0.0 {
                        tp = cand;
                        break;
                    }
                    lambda *= 2.0;
                    if lambda > 1e12 {
                        return Err(mu_error(mu, "no root of A(lambda, mu) = 0"));
                    }
                }
            }
        }
    }
    for _ in 0..200 {
        if tp.value.abs() < ROOT_TOLERANCE {
            return Ok(tp);
        }
        let next = tp.lambda - tp.value / tp.grad.0;
        if next >= tp.lambda {
            // Rounding floor reached.
            return Ok(tp);
        }
        tp = dist.cgf(next, mu)?;
    }
    if tp.value.abs() < 1e3 * ROOT_TOLERANCE {
        Ok(tp)
    } else {
        Err(CrpError::Numerical(format!(
            "root of A(lambda, {mu}) = 0 did not converge (residual {})",
            tp.value
        )))
    }
}

/// `A(mu)`, minus the root of `A(lambda, mu) = 0`.
pub fn a_of_mu(dist: &JumpDistribution, mu: f64) -> Result<f64> {
    boundary_point(dist, mu).map(|tp| -tp.lambda)
}

/// `A'(mu) = A'_2 / A'_1` at `(-A(mu), mu)`.
pub fn a_prime_of_mu(dist: &JumpDistribution, mu: f64) -> Result<f64> {
    boundary_point(dist, mu).map(|tp| tp.grad.1 / tp.grad.0)
}

/// `A''(mu)` from the second implicit derivative of `A(-A(mu), mu) = 0`.
pub fn a_second_of_mu_closed_form(dist: &JumpDistribution, mu: f64) -> Result<f64> {
    let tp = boundary_point(dist, mu)?;
    Ok(closed_form_second(&tp))
}

fn closed_form_second(tp: &TiltPoint) -> f64 {
    let s = tp.grad.1 / tp.grad.0;
    (tp.hess.xx * s * s - 2.0 * tp.hess.xy * s + tp.hess.yy) / tp.grad.0
}

/// `A''(mu)` by Richardson-extrapolated central differences of `A'(mu)`.
pub fn a_second_of_mu(dist: &JumpDistribution, mu: f64) -> Result<f64> {
    let h = 1e-5 * (1.0 + mu.abs());
    let central = |h: f64| -> Result<f64> {
        Ok((a_prime_of_mu(dist, mu + h)? - a_prime_of_mu(dist, mu - h)?) / (2.0 * h))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `(alpha_-, alpha_+)`: the extreme support slopes, which are the limits of
/// `A'(mu)` as `mu -> -inf` and `+inf`.
pub fn alpha_bounds(dist: &JumpDistribution) -> (f64, f64) {
    dist.support_slopes()
}

fn check_alpha(dist: &JumpDistribution, alpha: f64) -> Result<()> {
    let (lo, hi) = alpha_bounds(dist);
    if alpha.is_finite() && alpha > lo + ALPHA_GUARD && alpha < hi - ALPHA_GUARD {
        Ok(())
    } else {
        Err(CrpError::OutsideAlphaDomain {
            alpha,
            alpha_minus: lo,
            alpha_plus: hi,
            guard: ALPHA_GUARD,
        })
    }
}

/// `mu(alpha)`, the inverse of `A'(mu)`, by safeguarded Newton on an
/// expanding bracket.
pub fn mu_of_alpha(dist: &JumpDistribution, alpha: f64) -> Result<TiltPoint> {
    check_alpha(dist, alpha)?;
    let eval = |mu: f64| -> Result<(TiltPoint, f64)> {
        let tp = boundary_point(dist, mu)?;
        let f = tp.grad.1 / tp.grad.0 - alpha;
        Ok((tp, f))
    };
    let (tp0, f0) = eval(0.0)?;
    if f0 == 0.0 {
        return Ok(tp0);
    }
    // A'(mu) increases, so the root lies on the side where f changes sign.
    let dir = if f0 < 0.0 { 1.0 } else { -1.0 };
    let mut inner = 0.0f64;
    let mut step = 1.0f64;
    let outer = loop {
        let probe = dir * step;
        let (_, fp) = eval(probe)?;
        if fp == 0.0 || (fp > 0.0) != (f0 > 0.0) {
            break probe;
        }
        inner = probe;
        step *= 2.0;
        if step > 1e6 {
            return Err(CrpError::Numerical(format!(
                "mu(alpha) bracket expansion failed at alpha = {alpha}"
            )));
        }
    };
    let (mut lo, mut hi) = if dir > 0.0 {
        (inner, outer)
    } else {
        (outer, inner)
    };
    let mut mu = 0.5 * (lo + hi);
    let (mut tp, mut f) = eval(mu)?;
    for _ in 0..200 {
        if f.abs() < 1e-15 || (hi - lo) < 1e-15 * (1.0 + mu.abs()) {
            return Ok(tp);
        }
        if f < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let deriv = closed_form_second(&tp);
        let newton = mu - f / deriv;
        let next = if deriv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == mu {
            return Ok(tp);
        }
        mu = next;
        (tp, f) = eval(mu)?;
    }
    if f.abs() < 1e-12 {
        Ok(tp)
    } else {
        Err(CrpError::Numerical(format!(
            "mu(alpha) did not converge at alpha = {alpha} (residual {f})"
        )))
    }
}

/// Full bundle `{mu(alpha), lambda(alpha), D, D', D''}` at one alpha.
pub fn rate_point(dist: &JumpDistribution, alpha: f64) -> Result<RatePoint> {
    let tp = mu_of_alpha(dist, alpha)?;
    let mu = tp.mu;
    let lambda = tp.lambda;
    let a2 = a_second_of_mu(dist, mu)?;
    Ok(RatePoint {
        alpha,
        mu_alpha: mu,
        lambda_alpha: lambda,
        d: lambda + alpha * mu,
        d1: mu,
        d2: 1.0 / a2,
        in_domain: true,
        below_lambda_plus: lambda < dist.lambda_plus(),
    })
}

/// `D(alpha)`.
pub fn d_of_alpha(dist: &JumpDistribution, alpha: f64) -> Result<f64> {
    mu_of_alpha(dist, alpha).map(|tp| tp.lambda + alpha * tp.mu)
}

/// `lambda(alpha)` alone, skipping the numeric second derivative.
pub fn lambda_of_alpha(dist: &JumpDistribution, alpha: f64) -> Result<f64> {
    mu_of_alpha(dist, alpha).map(|tp| tp.lambda)
}

/// `D(theta, alpha) = theta D(alpha / theta)` with its gradient.
pub fn d_two_arg(dist: &JumpDistribution, theta: f64, alpha: f64) -> Result<ConeValue> {
    if !(theta > 0.0) || !alpha.is_finite() {
        return Err(CrpError::OutsideCone {
            theta,
            alpha,
            reason: "theta must be positive".into(),
        });
    }
    let tp = mu_of_alpha(dist, alpha / theta).map_err(|e| match e {
        CrpError::OutsideAlphaDomain { .. } => CrpError::OutsideCone {
            theta,
            alpha,
            reason: e.to_string(),
        },
        other => other,
    })?;
    Ok(ConeValue {
        value: theta * (tp.lambda + alpha / theta * tp.mu),
        grad: (tp.lambda, tp.mu),
    })
}

/// Domain boundaries and the beta-interval.
pub fn domain(dist: &JumpDistribution) -> DomainSummary {
    let mut diagnostics = Vec::new();
    let (mu_minus, mu_plus) = mu_bounds(dist);
    let (alpha_minus, alpha_plus) = alpha_bounds(dist);
    let lambda_plus = dist.lambda_plus();

    for (mu, bound, name) in [
        (-SLOPE_PROBE_MU, alpha_minus, "alpha_-"),
        (SLOPE_PROBE_MU, alpha_plus, "alpha_+"),
    ] {
        match a_prime_of_mu(dist, mu) {
            Ok(v) if (v - bound).abs() > 1e-4 => diagnostics.push(format!(
                "A'({mu}) = {v} differs from the support slope {name} = {bound} by more than 1e-4"
            )),
            Ok(_) => {}
            Err(e) => diagnostics.push(format!("A'({mu}) unavailable: {e}")),
        }
    }

    let zero_inside = alpha_minus + ALPHA_GUARD < 0.0 && 0.0 < alpha_plus - ALPHA_GUARD;
    let d0 = if zero_inside {
        match d_of_alpha(dist, 0.0) {
            Ok(v) => Some(v),
            Err(e) => {
                diagnostics.push(format!("D(0) unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };

    let (beta_minus, beta_plus) = if lambda_plus.is_finite() {
        beta_interval(
            dist,
            lambda_plus,
            alpha_minus,
            alpha_plus,
            zero_inside,
            &mut diagnostics,
        )
    } else {
        (None, None)
    };

    DomainSummary {
        mu_minus,
        mu_plus,
        alpha_minus,
        alpha_plus,
        lambda_plus,
        beta_minus,
        beta_plus,
        d0,
        diagnostics,
    }
}

/// Expanding search for the largest solvable `|mu|` in each direction.
fn mu_bounds(dist: &JumpDistribution) -> (f64, f64) {
    let search = |sign: f64| {
        let mut good = 0.0f64;
        let mut probe = 1.0f64;
        while probe <= 1024.0 {
            if boundary_point(dist, sign * probe).is_err() {
                let mut bad = probe;
                for _ in 0..60 {
                    let mid = 0.5 * (good + bad);
                    if boundary_point(dist, sign * mid).is_ok() {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                return sign * good;
            }
            good = probe;
            probe *= 2.0;
        }
        sign * f64::INFINITY
    };
    (search(-1.0), search(1.0))
}

fn beta_interval(
    dist: &JumpDistribution,
    lambda_plus: f64,
    alpha_minus: f64,
    alpha_plus: f64,
    zero_inside: bool,
    diagnostics: &mut Vec<String>,
) -> (Option<f64>, Option<f64>) {
    let lo = alpha_minus + ALPHA_GUARD;
    let hi = alpha_plus - ALPHA_GUARD;
    // lambda(alpha) increases up to alpha = 0 and decreases after it, so its
    // maximum over the domain sits at zero or at the endpoint nearest zero.
    let peak = if zero_inside {
        0.0
    } else if hi <= 0.0 {
        hi
    } else {
        lo
    };
    let excess = |alpha: f64| lambda_of_alpha(dist, alpha).map(|l| l - lambda_plus);
    let peak_excess = match excess(peak) {
        Ok(v) => v,
        Err(e) => {
            diagnostics.push(format!("lambda({peak}) unavailable: {e}"));
            return (None, None);
        }
    };
    if peak_excess < 0.0 {
        return (None, None);
    }
    let solve = |outer: f64| -> Option<f64> {
        if outer == peak {
            return Some(peak);
        }
        // Walk out from the peak, refining geometrically toward the endpoint
        // where the tilt can sit too close to the tail wall to evaluate.
        let mut inside = peak;
        let mut crossing = None;
        let fractions = (1..16)
            .map(|i| i as f64 / 16.0)
            .chain((5..=40).map(|k| 1.0 - 0.5f64.powi(k)))
            .chain(std::iter::once(1.0));
        for f in fractions {
            let probe = peak + f * (outer - peak);
            match excess(probe) {
                Ok(v) if v >= 0.0 => inside = probe,
                Ok(_) => {
                    crossing = Some(probe);
                    break;
                }
                Err(_) => return None,
            }
        }
        let Some(crossing) = crossing else {
            return Some(outer);
        };
        // excess(inside) >= 0 > excess(crossing).
        let (mut a, mut b) = (inside, crossing);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if (b - a).abs() < 1e-14 {
                break;
            }
            match excess(mid) {
                Ok(v) if v >= 0.0 => a = mid,
                Ok(_) => b = mid,
                Err(_) => return None,
            }
        }
        Some(a)
    };
    let bm = solve(lo);
    let bp = solve(hi);
    if bm.is_none() || bp.is_none() {
        diagnostics.push("beta-interval root search failed".into());
        return (None, None);
    }
    (bm, bp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::{Atom, GeometricTail, TimeFloor};
    use approx::assert_relative_eq;

    fn four_atom() -> JumpDistribution {
        JumpDistribution::from_triples(&[(1, 0, 0.25), (1, 1, 0.25), (2, 0, 0.25), (2, 1, 0.25)])
            .unwrap()
    }

    #[test]
    fn a_of_mu_examples() {
        let d = four_atom();
        assert!(a_of_mu(&d, 0.0).unwrap().abs() < 1e-15);
        // psi(lambda, ln 3) = (y + y^2) / 2 * (1 + 3) / 2 with y = e^lambda,
        // so the root solves y^2 + y - 1 = 0.
        let y = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(a_of_mu(&d, 3f64.ln()).unwrap(), -y.ln(), epsilon = 1e-13);
        assert!((a_of_mu(&d, 3f64.ln()).unwrap() - 0.48121).abs() < 1e-5);
    }

    #[test]
    fn a_prime_at_zero_is_drift() {
        let d = four_atom();
        assert_relative_eq!(a_prime_of_mu(&d, 0.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn a_second_numeric_matches_closed_form() {
        let d = JumpDistribution::from_triples(&[(1, 0, 0.4), (1, 1, 0.4), (2, 0, 0.2)]).unwrap();
        for mu in [-3.0, -1.0, 0.0, 0.5, 2.0, 5.0] {
            let num = a_second_of_mu(&d, mu).unwrap();
            let exact = a_second_of_mu_closed_form(&d, mu).unwrap();
            assert_relative_eq!(num, exact, max_relative = 1e-7);
        }
        // A''(0) = sigma^2.
        let m = d.moments();
        assert_relative_eq!(
            a_second_of_mu_closed_form(&d, 0.0).unwrap(),
            m.sigma2,
            epsilon = 1e-14
        );
    }

    #[test]
    fn rate_point_at_drift() {
        let d = four_atom();
        let rp = rate_point(&d, 1.0 / 3.0).unwrap();
        assert!(rp.d.abs() < 1e-15 && rp.d1.abs() < 1e-15);
        assert!(rp.lambda_alpha.abs() < 1e-15 && rp.mu_alpha.abs() < 1e-15);
        assert_relative_eq!(rp.d2, 5.4, max_relative = 1e-8);
    }

    #[test]
    fn rate_point_refuses_guard_band() {
        let d = four_atom();
        assert!(matches!(
            rate_point(&d, 1.0 - 1e-7),
            Err(CrpError::OutsideAlphaDomain { .. })
        ));
        assert!(matches!(
            rate_point(&d, -0.1),
            Err(CrpError::OutsideAlphaDomain { .. })
        ));
        assert!(rate_point(&d, 0.999).is_ok());
        assert!(rate_point(&d, 0.001).is_ok());
    }

    #[test]
    fn four_atom_domain() {
        let s = domain(&four_atom());
        assert_eq!(s.alpha_minus, 0.0);
        assert_eq!(s.alpha_plus, 1.0);
        assert_eq!(s.lambda_plus, f64::INFINITY);
        assert!(s.beta_interval().is_none());
        assert!(s.mu_minus.is_infinite() && s.mu_plus.is_infinite());
        assert!(s.diagnostics.is_empty(), "{:?}", s.diagnostics);
    }

    #[test]
    fn homogeneity_of_two_arg_form() {
        let d = four_atom();
        for &(th, al) in &[(1.0, 0.2), (0.7, 0.5), (2.0, 0.9)] {
            let one = d_two_arg(&d, th, al).unwrap();
            let two = d_two_arg(&d, 2.0 * th, 2.0 * al).unwrap();
            assert!((two.value - 2.0 * one.value).abs() < 1e-12);
            assert_eq!(one.grad, two.grad);
        }
        assert!(d_two_arg(&d, 1.0, 1.0 / 3.0).unwrap().value.abs() < 1e-15);
        assert!(d_two_arg(&d, -1.0, 0.0).is_err());
        assert!(d_two_arg(&d, 1.0, 1.5).is_err());
    }

    #[test]
    fn flat_tail_never_reaches_lambda_plus() {
        // With a constant jump size on the tail, psi blows up on the whole
        // line lambda = lambda_plus, so lambda(alpha) < lambda_plus always.
        for q in [0.2f64, 0.5, 0.8, 0.95] {
            let mass_tail = 0.2;
            let c = mass_tail * (1.0 - q) / q.powi(2);
            let d = JumpDistribution::new(
                vec![
                    Atom::new(1, -1, 0.3),
                    Atom::new(1, 0, 0.1),
                    Atom::new(1, 1, 0.4),
                ],
                Some(GeometricTail::new(q, 2, 0, c)),
                TimeFloor::Step,
            )
            .unwrap();
            let s = domain(&d);
            assert!(s.d0.unwrap() < s.lambda_plus);
            assert!(s.beta_interval().is_none());
        }
    }
}
