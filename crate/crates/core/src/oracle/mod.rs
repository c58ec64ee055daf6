//! Brute-force reference computations: exact convolutions, the renewal
//! measure, the exact pmf of `Z(n)` and Monte Carlo estimates.

mod sampler;
mod sparse;

use std::collections::BTreeMap;

pub use sampler::{simulate, CellEstimate, SamplingMode, SimulationResult, SIMULATION_BLOCK};
pub use sparse::SparsePmf;

use crate::lattice_model::{CrpModel, JumpDistribution};
use crate::numeric::CompensatedSum;
use sparse::SparseAccumulator;

/// Tail mass below which geometric tails are cut off in the exact oracle.
pub const TAIL_CUTOFF: f64 = 1e-14;

/// Law of `S_k = xi_1 + ... + xi_k` restricted to `t <= t_max`. `k = 0` is the
/// unit mass.
pub fn step_pmf(model: &CrpModel, k: usize, t_max: i64) -> SparsePmf {
    step_pmf_with_cutoff(model, k, t_max, TAIL_CUTOFF)
}

pub fn step_pmf_with_cutoff(model: &CrpModel, k: usize, t_max: i64, cutoff: f64) -> SparsePmf {
    if k == 0 {
        return SparsePmf::unit();
    }
    let (first, eps1) = model.first().truncated_atoms(cutoff);
    let (step, eps) = model.step().truncated_atoms(cutoff);
    let mut cur = SparsePmf::unit().convolve(&first, t_max);
    for _ in 1..k {
        cur = cur.convolve(&step, t_max);
    }
    cur.set_truncation_mass(1.0 - (1.0 - eps1) * (1.0 - eps).powi(k as i32 - 1));
    cur
}

/// `k`-fold convolution of a single jump law.
pub fn jump_power(dist: &JumpDistribution, k: usize, t_max: i64) -> SparsePmf {
    let (atoms, eps) = dist.truncated_atoms(TAIL_CUTOFF);
    let mut cur = SparsePmf::unit();
    for _ in 0..k {
        cur = cur.convolve(&atoms, t_max);
    }
    cur.set_truncation_mass(1.0 - (1.0 - eps).powi(k as i32));
    cur
}

/// `H(t, x) = sum_{k >= 0} P(S_k = (t, x))` for `0 <= t <= t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    pub measure: SparsePmf,
    pub t_max: i64,
    /// Largest per-jump mass dropped by tail truncation.
    pub truncation_mass: f64,
}

impl RenewalTable {
    pub fn get(&self, t: i64, x: i64) -> f64 {
        self.measure.get(t, x)
    }
}

pub fn renewal_measure_exact(model: &CrpModel, t_max: i64) -> RenewalTable {
    let (first, eps1) = model.first().truncated_atoms(TAIL_CUTOFF);
    let (step, eps) = model.step().truncated_atoms(TAIL_CUTOFF);
    let mut acc = SparseAccumulator::default();
    let unit = SparsePmf::unit();
    acc.add_pmf(&unit);
    // tau >= 1 for every later jump, so this stops after at most t_max + 1 rounds.
    let mut cur = unit.convolve(&first, t_max);
    while !cur.is_empty() {
        acc.add_pmf(&cur);
        cur = cur.convolve(&step, t_max);
    }
    RenewalTable {
        measure: acc.finish(eps1.max(eps)),
        t_max,
        truncation_mass: eps1.max(eps),
    }
}

/// Exact `P(Z(n) = x)` for all `x`, by the last-renewal decomposition
/// `P(Z(n)=x) = 1{x=0} P(tau_1 >= n) + sum_{k >= 1} sum_m P(S_k = (m, x)) P(tau >= n - m)`.
pub fn crp_pmf_exact(model: &CrpModel, n: u64) -> BTreeMap<i64, f64> {
    if n == 0 {
        return BTreeMap::from([(0, 1.0)]);
    }
    let table = renewal_measure_exact(model, n as i64 - 1);
    crp_pmf_from_table(model, &table, n)
}

/// Same as [`crp_pmf_exact`] using a precomputed table with `t_max >= n - 1`.
pub fn crp_pmf_from_table(model: &CrpModel, table: &RenewalTable, n: u64) -> BTreeMap<i64, f64> {
    assert!(
        n >= 1 && n as i64 - 1 <= table.t_max,
        "renewal table too short"
    );
    let n = n as i64;
    let mut lo = 0i64;
    let mut hi = 0i64;
    for m in 0..n {
        if let Some((x0, vals)) = table.measure.row(m) {
            lo = lo.min(x0);
            hi = hi.max(x0 + vals.len() as i64 - 1);
        }
    }
    let mut acc = vec![CompensatedSum::new(); (hi - lo + 1) as usize];
    acc[(-lo) as usize] += model.first().survival(n);
    for m in 0..n {
        let Some((x0, vals)) = table.measure.row(m) else {
            continue;
        };
        let surv = model.step().survival(n - m);
        if surv == 0.0 {
            continue;
        }
        for (i, &h) in vals.iter().enumerate() {
            let x = x0 + i as i64;
            // Drop the k = 0 term of the renewal measure.
            let h = if m == 0 && x == 0 { h - 1.0 } else { h };
            acc[(x - lo) as usize] += h * surv;
        }
    }
    acc.iter()
        .enumerate()
        .map(|(i, s)| (lo + i as i64, s.value()))
        .filter(|(_, v)| *v != 0.0)
        .collect()
}

/// Exact pmfs for every `n` in `1..=n_max` from one renewal table.
pub fn crp_pmf_all(model: &CrpModel, n_max: u64) -> Vec<BTreeMap<i64, f64>> {
    let table = renewal_measure_exact(model, n_max as i64 - 1);
    (1..=n_max)
        .map(|n| crp_pmf_from_table(model, &table, n))
        .collect()
}

/// Exact `P(Z(n) = x)` by forward dynamic programming over the state
/// `(next epoch, Z before it, pending jump size)`.
pub fn crp_pmf_path_dp(model: &CrpModel, n: u64) -> BTreeMap<i64, f64> {
    let (first, _) = model.first().truncated_atoms(TAIL_CUTOFF);
    let (step, _) = model.step().truncated_atoms(TAIL_CUTOFF);
    let n = n as i64;
    let mut states: BTreeMap<(i64, i64, i64), f64> = BTreeMap::new();
    for a in &first {
        *states.entry((a.t, 0, a.z)).or_insert(0.0) += a.p;
    }
    for j in 0..n {
        let mut fired = Vec::new();
        while let Some(entry) = states.first_entry() {
            if entry.key().0 != j {
                break;
            }
            fired.push(entry.remove_entry());
        }
        for ((_, z, pending), p) in fired {
            let z = z + pending;
            for a in &step {
                *states.entry((j + a.t, z, a.z)).or_insert(0.0) += p * a.p;
            }
        }
    }
    let mut out: BTreeMap<i64, f64> = BTreeMap::new();
    for ((_, z, _), p) in states {
        *out.entry(z).or_insert(0.0) += p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_model::{GeometricTail, TimeFloor};

    fn tiny() -> CrpModel {
        let step = JumpDistribution::from_triples(&[
            (1, 0, 0.25),
            (1, 1, 0.25),
            (2, 0, 0.25),
            (2, 1, 0.25),
        ])
        .unwrap();
        CrpModel::homogeneous(step).unwrap()
    }

    fn with_tails() -> CrpModel {
        let step = JumpDistribution::new(
            vec![crate::Atom::new(1, 0, 0.3), crate::Atom::new(1, 1, 0.3)],
            Some(GeometricTail::new(0.5, 2, 0, 0.8)),
            TimeFloor::Step,
        );
        let step = step.unwrap();
        let first = JumpDistribution::new(
            vec![crate::Atom::new(0, 0, 0.5), crate::Atom::new(3, 2, 0.5)],
            None,
            TimeFloor::FirstJump,
        )
        .unwrap();
        CrpModel::new(step, first).unwrap()
    }

    #[test]
    fn small_pmf_by_hand() {
        // n = 2: Z(2) = zeta_1 if tau_1 = 1, else 0.
        let pmf = crp_pmf_exact(&tiny(), 2);
        assert!((pmf[&0] - 0.75).abs() < 1e-15);
        assert!((pmf[&1] - 0.25).abs() < 1e-15);
        // n = 3: Z = zeta_1 if tau_1 = 2 or tau_2 = 2, else zeta_1 + zeta_2.
        let pmf = crp_pmf_exact(&tiny(), 3);
        let total: f64 = pmf.values().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((pmf[&0] - (0.25 + 0.25 * (0.25 + 0.5))).abs() < 1e-15);
    }

    #[test]
    fn exact_matches_path_dp() {
        for model in [tiny(), with_tails()] {
            for n in 1..=20 {
                let a = crp_pmf_exact(&model, n);
                let b = crp_pmf_path_dp(&model, n);
                let keys: std::collections::BTreeSet<i64> =
                    a.keys().chain(b.keys()).copied().collect();
                for x in keys {
                    let d = a.get(&x).unwrap_or(&0.0) - b.get(&x).unwrap_or(&0.0);
                    assert!(d.abs() < 1e-13, "n={n} x={x} d={d}");
                }
            }
        }
    }

    #[test]
    fn mass_is_conserved() {
        let model = with_tails();
        for (i, pmf) in crp_pmf_all(&model, 64).iter().enumerate() {
            let total: f64 = pmf.values().sum();
            assert!((total - 1.0).abs() < 1e-9, "n={} total={total}", i + 1);
        }
    }

    #[test]
    fn renewal_measure_matches_step_sums() {
        let model = with_tails();
        let table = renewal_measure_exact(&model, 12);
        let mut direct = SparseAccumulator::default();
        for k in 0..=13 {
            direct.add_pmf(&step_pmf(&model, k, 12));
        }
        let direct = direct.finish(0.0);
        for (t, x, h) in table.measure.iter() {
            assert!((h - direct.get(t, x)).abs() < 1e-14);
        }
        assert_eq!(table.measure.len(), direct.len());
    }

    #[test]
    fn step_pmf_truncation_mass() {
        let model = with_tails();
        let s = step_pmf_with_cutoff(&model, 3, 1000, 1e-6);
        let (_, eps) = model.step().truncated_atoms(1e-6);
        assert!(eps > 0.0 && eps < 1e-6);
        let expected = 1.0 - (1.0 - eps).powi(2);
        assert!((s.truncation_mass() - expected).abs() < 1e-18);
        assert!((s.total_mass() + s.truncation_mass() - 1.0).abs() < 1e-12);
    }
}
