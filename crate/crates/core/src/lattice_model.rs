//! Integer-lattice jump laws `xi = (tau, zeta)` and their cumulant function
//! `A(lambda, mu) = ln E exp(lambda tau + mu zeta)`.
//!
//! A [`JumpDistribution`] is a finite table of atoms, optionally extended by
//! a geometric tail on the time coordinate. Every cumulant quantity is a
//! closed-form weighted sum, so values, gradients and Hessians are exact up
//! to rounding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CrpError, Result};
use crate::numeric::{compensated_sum, log_sum_exp, CompensatedSum, Sym2};

/// Mass tolerance accepted before renormalising.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// One atom `P(tau = t, zeta = z) = p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: i64,
    pub z: i64,
    pub p: f64,
}

impl Atom {
    pub fn new(t: i64, z: i64, p: f64) -> Self {
        Self { t, z, p }
    }
}

/// Geometric tail `P(tau = k, zeta = z0 + slope (k - k0)) = c q^k` for
/// every `k >= k0`.
///
/// With `slope = 0` the jump size is constant on the tail and the tilted
/// transform diverges on the whole line `lambda = -ln q`. A non-zero slope
/// tilts the finiteness boundary to `lambda + slope mu = -ln q`, which is
/// what lets `lambda(alpha)` exceed `lambda_plus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricTail {
    pub q: f64,
    pub k0: i64,
    pub z0: i64,
    pub c: f64,
    #[serde(default, rename = "s", skip_serializing_if = "is_zero")]
    pub slope: i64,
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

impl GeometricTail {
    pub fn new(q: f64, k0: i64, z0: i64, c: f64) -> Self {
        Self {
            q,
            k0,
            z0,
            c,
            slope: 0,
        }
    }

    pub fn with_slope(mut self, slope: i64) -> Self {
        self.slope = slope;
        self
    }

    /// Total tail mass `c q^k0 / (1 - q)`.
    pub fn mass(&self) -> f64 {
        self.c * self.q.powi(self.k0 as i32) / (1.0 - self.q)
    }

    /// Mass of `{tau >= k}` carried by the tail.
    pub fn mass_from(&self, k: i64) -> f64 {
        let k = k.max(self.k0);
        self.c * self.q.powf(k as f64) / (1.0 - self.q)
    }

    /// The lattice point carried at time `k >= k0`.
    pub fn point(&self, k: i64) -> (i64, i64) {
        (k, self.z0 + self.slope * (k - self.k0))
    }

    /// Largest lambda allowed at a given mu: `-ln q - slope mu`.
    pub fn lambda_limit(&self, mu: f64) -> f64 {
        -self.q.ln() - self.slope as f64 * mu
    }
}

/// Lower bound on the time coordinate of a jump law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFloor {
    /// Steps `xi_k`, `k >= 2`: `tau >= 1`.
    Step,
    /// The first jump `xi_1`: `tau_1 >= 0`.
    FirstJump,
}

impl TimeFloor {
    fn min_t(self) -> i64 {
        match self {
            TimeFloor::Step => 1,
            TimeFloor::FirstJump => 0,
        }
    }
}

/// A finite-support law on the integer lattice with an optional geometric
/// tail. Immutable after construction; total mass is exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDistribution {
    atoms: Vec<Atom>,
    tail: Option<GeometricTail>,
    floor: TimeFloor,
}

/// Cumulant function evaluated at one point, with its exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltPoint {
    pub lambda: f64,
    pub mu: f64,
    /// `A(lambda, mu)`.
    pub value: f64,
    /// Mean of `(tau, zeta)` under the tilt `exp(lambda tau + mu zeta - A)`.
    pub grad: (f64, f64),
    /// Covariance of `(tau, zeta)` under the same tilt.
    pub hess: Sym2,
}

/// First two moments of the step law in renewal-reward form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub a_tau: f64,
    pub a_zeta: f64,
    /// Drift `a_zeta / a_tau`.
    pub a: f64,
    /// `E(zeta - a tau)^2 / a_tau`.
    pub sigma2: f64,
    /// `sigma2` vanishes: `zeta / tau` is almost surely constant.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub arithmetic_ok: bool,
    /// Hermite normal form `[[a, b], [0, d]]` of the difference lattice.
    pub lattice_basis: [[i64; 2]; 2],
    pub cramer_ok: bool,
    pub lambda_plus: f64,
    pub messages: Vec<String>,
}

impl JumpDistribution {
    /// Builds and validates a jump law, renormalising the mass to one.
    pub fn new(atoms: Vec<Atom>, tail: Option<GeometricTail>, floor: TimeFloor) -> Result<Self> {
        if atoms.is_empty() && tail.is_none() {
            return Err(CrpError::InvalidModel("empty support".into()));
        }
        let min_t = floor.min_t();
        for (i, a) in atoms.iter().enumerate() {
            if a.t < min_t {
                return Err(CrpError::InvalidModel(format!(
                    "atoms[{i}]: t = {} is below the minimum {min_t}",
                    a.t
                )));
            }
            if !(a.p > 0.0 && a.p <= 1.0) {
                return Err(CrpError::InvalidModel(format!(
                    "atoms[{i}]: p = {} is not in (0, 1]",
                    a.p
                )));
            }
            if let Some(j) = atoms[..i].iter().position(|b| b.t == a.t && b.z == a.z) {
                return Err(CrpError::InvalidModel(format!(
                    "atoms[{i}] repeats the lattice point ({}, {}) of atoms[{j}]",
                    a.t, a.z
                )));
            }
        }
        if let Some(tail) = &tail {
            if !(tail.q > 0.0 && tail.q < 1.0) {
                return Err(CrpError::InvalidModel(format!(
                    "tail.q = {} is not in (0, 1)",
                    tail.q
                )));
            }
            if tail.k0 < 1 || tail.k0 < min_t {
                return Err(CrpError::InvalidModel(format!(
                    "tail.k0 = {} must be at least {}",
                    tail.k0,
                    min_t.max(1)
                )));
            }
            if !(tail.c > 0.0 && tail.c.is_finite()) {
                return Err(CrpError::InvalidModel(format!(
                    "tail.c = {} must be positive",
                    tail.c
                )));
            }
            for (i, a) in atoms.iter().enumerate() {
                if a.t >= tail.k0 && tail.point(a.t) == (a.t, a.z) {
                    return Err(CrpError::InvalidModel(format!(
                        "atoms[{i}] = ({}, {}) overlaps the geometric tail",
                        a.t, a.z
                    )));
                }
            }
        }
        let total = compensated_sum(
            atoms
                .iter()
                .map(|a| a.p)
                .chain(tail.iter().map(GeometricTail::mass)),
        );
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(CrpError::InvalidModel(format!(
                "total mass {total} differs from 1 by more than {MASS_TOLERANCE}"
            )));
        }
        let atoms = atoms
            .into_iter()
            .map(|a| Atom {
                p: a.p / total,
                ..a
            })
            .collect();
        let tail = tail.map(|t| GeometricTail {
            c: t.c / total,
            ..t
        });
        Ok(Self { atoms, tail, floor })
    }

    /// A step law (`tau >= 1`) with finite support.
    pub fn finite(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms, None, TimeFloor::Step)
    }

    /// Builds a step law from `(t, z, p)` triples.
    pub fn from_triples(triples: &[(i64, i64, f64)]) -> Result<Self> {
        Self::finite(
            triples
                .iter()
                .map(|&(t, z, p)| Atom::new(t, z, p))
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tail(&self) -> Option<&GeometricTail> {
        self.tail.as_ref()
    }

    pub fn floor(&self) -> TimeFloor {
        self.floor
    }

    /// `sup{lambda : E exp(lambda tau) < inf}`.
    pub fn lambda_plus(&self) -> f64 {
        match &self.tail {
            Some(t) => -t.q.ln(),
            None => f64::INFINITY,
        }
    }

    /// True when `(lambda, mu)` is interior to the finiteness domain.
    pub fn in_domain(&self, lambda: f64, mu: f64) -> bool {
        match &self.tail {
            Some(t) => lambda < t.lambda_limit(mu),
            None => lambda.is_finite() && mu.is_finite(),
        }
    }

    /// Largest time value of any atom (the tail is unbounded).
    pub fn max_atom_t(&self) -> i64 {
        self.atoms.iter().map(|a| a.t).max().unwrap_or(0)
    }

    /// `P(tau >= m)`.
    pub fn survival(&self, m: i64) -> f64 {
        let mut s: CompensatedSum = self
            .atoms
            .iter()
            .filter(|a| a.t >= m)
            .map(|a| a.p)
            .collect();
        if let Some(t) = &self.tail {
            s += t.mass_from(m);
        }
        s.value().min(1.0)
    }

    /// Support points followed by tail points up to the first `k` where the
    /// remaining tail mass drops below `cutoff`; returns the discarded mass.
    pub fn truncated_atoms(&self, cutoff: f64) -> (Vec<Atom>, f64) {
        let mut out = self.atoms.clone();
        let Some(tail) = &self.tail else {
            return (out, 0.0);
        };
        let mut k = tail.k0;
        loop {
            let rest = tail.mass_from(k);
            if rest < cutoff {
                return (out, rest);
            }
            let (t, z) = tail.point(k);
            out.push(Atom::new(t, z, tail.c * tail.q.powf(k as f64)));
            k += 1;
        }
    }

    /// `A(lambda, mu)` with the tilted mean and covariance.
    pub fn cgf(&self, lambda: f64, mu: f64) -> Result<TiltPoint> {
        if !self.in_domain(lambda, mu) {
            return Err(CrpError::OutsideCumulantDomain {
                lambda,
                mu,
                lambda_plus: self.lambda_plus(),
            });
        }
        // Each component carries (log weight, mean, covariance); atoms have
        // zero covariance, the tail is a shifted geometric law.
        let mut comps: Vec<(f64, (f64, f64), Sym2)> = self
            .atoms
            .iter()
            .map(|a| {
                (
                    a.p.ln() + lambda * a.t as f64 + mu * a.z as f64,
                    (a.t as f64, a.z as f64),
                    Sym2::new(0.0, 0.0, 0.0),
                )
            })
            .collect();
        if let Some(t) = &self.tail {
            let s = t.slope as f64;
            let log_r = t.q.ln() + lambda + mu * s;
            let r = log_r.exp();
            let one_minus_r = -log_r.exp_m1();
            let log_w =
                t.c.ln() + mu * t.z0 as f64 + t.k0 as f64 * (t.q.ln() + lambda) - one_minus_r.ln();
            let mean_j = r / one_minus_r;
            let var_j = mean_j / one_minus_r;
            comps.push((
                log_w,
                (t.k0 as f64 + mean_j, t.z0 as f64 + s * mean_j),
                Sym2::new(var_j, s * var_j, s * s * var_j),
            ));
        }
        let logs: Vec<f64> = comps.iter().map(|c| c.0).collect();
        let value = log_sum_exp(&logs);
        let weights: Vec<f64> = logs.iter().map(|l| (l - value).exp()).collect();
        let mt = compensated_sum(weights.iter().zip(&comps).map(|(w, c)| w * c.1 .0));
        let mz = compensated_sum(weights.iter().zip(&comps).map(|(w, c)| w * c.1 .1));
        let mut xx = CompensatedSum::new();
        let mut xy = CompensatedSum::new();
        let mut yy = CompensatedSum::new();
        for (w, (_, (ct, cz), cov)) in weights.iter().zip(&comps) {
            let dt = ct - mt;
            let dz = cz - mz;
            xx += w * (cov.xx + dt * dt);
            xy += w * (cov.xy + dt * dz);
            yy += w * (cov.yy + dz * dz);
        }
        Ok(TiltPoint {
            lambda,
            mu,
            value,
            grad: (mt, mz),
            hess: Sym2::new(xx.value(), xy.value(), yy.value()),
        })
    }

    /// `psi(lambda, mu) = exp(A(lambda, mu))`, infinite outside the domain.
    pub fn mgf(&self, lambda: f64, mu: f64) -> f64 {
        self.cgf(lambda, mu)
            .map(|tp| tp.value.exp())
            .unwrap_or(f64::INFINITY)
    }

    pub fn moments(&self) -> Moments {
        let tp = self.cgf(0.0, 0.0).expect("origin is always in the domain");
        let (a_tau, a_zeta) = tp.grad;
        let a = a_zeta / a_tau;
        let h = tp.hess;
        let e2 = (h.yy - 2.0 * a * h.xy + a * a * h.xx).max(0.0);
        let sigma2 = e2 / a_tau;
        let scale = h.yy + a * a * h.xx;
        Moments {
            a_tau,
            a_zeta,
            a,
            sigma2,
            degenerate: sigma2 <= 1e-14 * scale.max(1e-300) || e2 == 0.0,
        }
    }

    /// Checks condition [Z] through the difference lattice of the support.
    pub fn validate_arithmetic(&self) -> ValidationReport {
        let mut points: Vec<(i64, i64)> = self.atoms.iter().map(|a| (a.t, a.z)).collect();
        if let Some(t) = &self.tail {
            points.push(t.point(t.k0));
            points.push(t.point(t.k0 + 1));
        }
        let base = points[0];
        let mut hnf = LatticeHnf::default();
        for &(t, z) in &points[1..] {
            hnf.insert((t - base.0) as i128, (z - base.1) as i128);
        }
        let basis = hnf.basis();
        let det = basis[0][0] * basis[1][1];
        let arithmetic_ok = det == 1;
        let mut messages = Vec::new();
        if !arithmetic_ok {
            if det == 0 {
                messages.push(format!(
                    "support lies on a line through ({}, {}): [Z] fails",
                    base.0, base.1
                ));
            } else {
                messages.push(format!(
                    "support differences generate a sublattice of index {det}: [Z] fails"
                ));
            }
        }
        ValidationReport {
            arithmetic_ok,
            lattice_basis: basis,
            cramer_ok: true,
            lambda_plus: self.lambda_plus(),
            messages,
        }
    }

    pub fn is_arithmetic(&self) -> bool {
        self.validate_arithmetic().arithmetic_ok
    }

    /// Extreme slopes `z / t` of the support, the limits of `A'(mu)` as
    /// `mu -> -inf` and `mu -> +inf`. The tail contributes both its first
    /// point and its asymptotic slope. Atoms with `t = 0` are excluded.
    pub fn support_slopes(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut push = |r: f64| {
            lo = lo.min(r);
            hi = hi.max(r);
        };
        for a in self.atoms.iter().filter(|a| a.t > 0) {
            push(a.z as f64 / a.t as f64);
        }
        if let Some(t) = &self.tail {
            push(t.z0 as f64 / t.k0 as f64);
            push(t.slope as f64);
        }
        (lo, hi)
    }
}

/// Incremental Hermite normal form of a subgroup of `Z^2`.
#[derive(Debug, Default, Clone, Copy)]
struct LatticeHnf {
    // First row (a, b) with a > 0, or unset while every vector has t = 0.
    first: Option<(i128, i128)>,
    // Generator d >= 0 of the subgroup on the second axis.
    d: i128,
}

impl LatticeHnf {
    fn insert(&mut self, x: i128, y: i128) {
        match self.first {
            None if x == 0 => self.d = gcd(self.d, y),
            None => {
                self.first = Some(if x < 0 { (-x, -y) } else { (x, y) });
            }
            Some((a, b)) => {
                if x == 0 {
                    self.d = gcd(self.d, y);
                } else {
                    let (g, u, v) = ext_gcd(a, x);
                    let new_first = (g, u * b + v * y);
                    let eliminated = (x / g) * b - (a / g) * y;
                    self.d = gcd(self.d, eliminated);
                    self.first = Some(new_first);
                }
            }
        }
        if let (Some((a, b)), d) = (self.first, self.d) {
            if d > 0 {
                self.first = Some((a, b.rem_euclid(d)));
            }
        }
    }

    fn basis(&self) -> [[i64; 2]; 2] {
        let (a, b) = self.first.unwrap_or((0, 0));
        [[a as i64, b as i64], [0, self.d as i64]]
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Returns `(g, u, v)` with `u a + v b = g = gcd(a, b)`, `g > 0`.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// A compound renewal process given by its first-jump and step laws.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpModel {
    step: JumpDistribution,
    first: JumpDistribution,
    homogeneous: bool,
    allow_degenerate: bool,
}

impl CrpModel {
    pub fn new(step: JumpDistribution, first: JumpDistribution) -> Result<Self> {
        if step.floor != TimeFloor::Step {
            return Err(CrpError::InvalidModel(
                "step: the step law must have tau >= 1".into(),
            ));
        }
        let homogeneous = first.atoms == step.atoms && first.tail == step.tail;
        Ok(Self {
            step,
            first,
            homogeneous,
            allow_degenerate: false,
        })
    }

    pub fn homogeneous(step: JumpDistribution) -> Result<Self> {
        let first = JumpDistribution {
            floor: TimeFloor::FirstJump,
            ..step.clone()
        };
        Self::new(step, first)
    }

    /// Lets asymptotic operations run on a step law that fails [Z].
    pub fn allow_degenerate(mut self, allow: bool) -> Self {
        self.allow_degenerate = allow;
        self
    }

    pub fn step(&self) -> &JumpDistribution {
        &self.step
    }

    pub fn first(&self) -> &JumpDistribution {
        &self.first
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    pub fn degenerate_allowed(&self) -> bool {
        self.allow_degenerate
    }

    /// Fails with a condition error unless the step law satisfies [Z] or
    /// the override is set.
    pub fn ensure_arithmetic(&self) -> Result<()> {
        if self.allow_degenerate {
            return Ok(());
        }
        let report = self.step.validate_arithmetic();
        if report.arithmetic_ok {
            Ok(())
        } else {
            Err(CrpError::ConditionViolated {
                condition: crate::error::Condition::Arithmetic,
                detail: report.messages.join("; "),
            })
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| CrpError::InvalidModel(format!("model file: {e}")))?;
        file.into_model()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CrpError::InvalidModel(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_model_file(&self) -> ModelFile {
        let to_file = |d: &JumpDistribution| DistributionFile {
            atoms: d.atoms.iter().map(|a| (a.t, a.z, a.p)).collect(),
            tail: d.tail,
        };
        ModelFile {
            step: to_file(&self.step),
            first: (!self.homogeneous).then(|| to_file(&self.first)),
        }
    }
}

/// On-disk model: `{"step": {"atoms": [[t, z, p], ...], "tail": {...}},
/// "first": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub step: DistributionFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<DistributionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    #[serde(default)]
    pub atoms: Vec<(i64, i64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<GeometricTail>,
}

impl DistributionFile {
    fn build(&self, floor: TimeFloor, field: &str) -> Result<JumpDistribution> {
        let atoms = self
            .atoms
            .iter()
            .map(|&(t, z, p)| Atom::new(t, z, p))
            .collect();
        JumpDistribution::new(atoms, self.tail, floor).map_err(|e| match e {
            CrpError::InvalidModel(msg) => CrpError::InvalidModel(format!("{field}: {msg}")),
            other => other,
        })
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<CrpModel> {
        let step = self.step.build(TimeFloor::Step, "step")?;
        match &self.first {
            None => CrpModel::homogeneous(step),
            Some(f) => CrpModel::new(step, f.build(TimeFloor::FirstJump, "first")?),
        }
    }
}
