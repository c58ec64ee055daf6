#![allow(dead_code)]

use crp_core::{Atom, CrpModel, GeometricTail, JumpDistribution, TimeFloor};

pub fn four_atom() -> JumpDistribution {
    JumpDistribution::from_triples(&[(1, 0, 0.25), (1, 1, 0.25), (2, 0, 0.25), (2, 1, 0.25)])
        .unwrap()
}

pub fn three_atom() -> JumpDistribution {
    JumpDistribution::from_triples(&[(1, 0, 0.4), (1, 1, 0.4), (2, 0, 0.2)]).unwrap()
}

/// Two unit-time atoms plus a flat geometric tail of mass 0.4 from `t = 2`.
pub fn flat_tail() -> JumpDistribution {
    JumpDistribution::new(
        vec![Atom::new(1, 0, 0.3), Atom::new(1, 1, 0.3)],
        Some(GeometricTail::new(0.5, 2, 0, 0.8)),
        TimeFloor::Step,
    )
    .unwrap()
}

/// Unit-time atoms at `z = -1, 0, 1` and a slope-one tail of mass 0.2.
pub fn sloped_tail(q: f64) -> JumpDistribution {
    let c = 0.2 * (1.0 - q) / (q * q);
    JumpDistribution::new(
        vec![
            Atom::new(1, -1, 0.1),
            Atom::new(1, 0, 0.1),
            Atom::new(1, 1, 0.6),
        ],
        Some(GeometricTail::new(q, 2, 0, c).with_slope(1)),
        TimeFloor::Step,
    )
    .unwrap()
}

pub fn homogeneous(d: JumpDistribution) -> CrpModel {
    CrpModel::homogeneous(d).unwrap()
}

/// The four-atom step law with a first jump that can land at `t = 0`.
pub fn delayed_four_atom() -> CrpModel {
    let first = JumpDistribution::new(
        vec![
            Atom::new(0, 0, 0.5),
            Atom::new(1, 1, 0.3),
            Atom::new(2, 0, 0.2),
        ],
        None,
        TimeFloor::FirstJump,
    )
    .unwrap();
    CrpModel::new(four_atom(), first).unwrap()
}

/// `ln E exp(lambda tau + mu zeta)` summed term by term, tail included up to
/// negligible terms. Returns `None` when the tail series does not converge.
pub fn direct_cgf(d: &JumpDistribution, lambda: f64, mu: f64) -> Option<f64> {
    let mut terms: Vec<f64> = d
        .atoms()
        .iter()
        .map(|a| a.p.ln() + lambda * a.t as f64 + mu * a.z as f64)
        .collect();
    if let Some(t) = d.tail() {
        let ratio = t.q.ln() + lambda + mu * t.slope as f64;
        if ratio >= -1e-3 {
            return None;
        }
        let mut k = t.k0;
        loop {
            let (tt, zz) = t.point(k);
            let l = t.c.ln() + k as f64 * t.q.ln() + lambda * tt as f64 + mu * zz as f64;
            terms.push(l);
            if (k - t.k0) as f64 * ratio < -60.0 {
                break;
            }
            k += 1;
        }
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(m + terms.iter().map(|l| (l - m).exp()).sum::<f64>().ln())
}

/// `(x - y) / y`, or the raw difference when `y` is zero.
pub fn rel(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        x - y
    } else {
        (x - y) / y
    }
}
