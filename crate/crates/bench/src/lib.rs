//! Fixture models shared by the benchmarks.

use crp_core::{Atom, CrpModel, GeometricTail, JumpDistribution, TimeFloor};

pub fn four_atom() -> CrpModel {
    let d =
        JumpDistribution::from_triples(&[(1, 0, 0.25), (1, 1, 0.25), (2, 0, 0.25), (2, 1, 0.25)])
            .expect("four-atom law");
    CrpModel::homogeneous(d).expect("model")
}

/// Three lattice atoms plus a slope-one geometric tail, `q = 0.75`.
pub fn sloped_tail() -> CrpModel {
    let q: f64 = 0.75;
    let d = JumpDistribution::new(
        vec![
            Atom::new(1, -1, 0.1),
            Atom::new(1, 0, 0.1),
            Atom::new(1, 1, 0.6),
        ],
        Some(GeometricTail::new(q, 2, 0, 0.2 * (1.0 - q) / (q * q)).with_slope(1)),
        TimeFloor::Step,
    )
    .expect("sloped law");
    CrpModel::homogeneous(d).expect("model")
}
