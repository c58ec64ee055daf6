use std::collections::BTreeMap;

use crate::lattice_model::Atom;

/// A measure on `Z^2` stored as one contiguous `x`-range per time row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsePmf {
    rows: BTreeMap<i64, Row>,
    truncation_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    x0: i64,
    values: Vec<f64>,
}

impl SparsePmf {
    /// Unit mass at the origin.
    pub fn unit() -> Self {
        let mut rows = BTreeMap::new();
        rows.insert(
            0,
            Row {
                x0: 0,
                values: vec![1.0],
            },
        );
        Self {
            rows,
            truncation_mass: 0.0,
        }
    }

    pub fn from_entries<I: IntoIterator<Item = (i64, i64, f64)>>(entries: I) -> Self {
        let mut acc = SparseAccumulator::default();
        let mut items: Vec<(i64, i64, f64)> = entries.into_iter().collect();
        items.sort_by_key(|e| (e.0, e.1));
        let mut ranges: BTreeMap<i64, (i64, i64)> = BTreeMap::new();
        for &(t, x, _) in &items {
            extend_range(&mut ranges, t, x, x);
        }
        acc.reserve(&ranges);
        for (t, x, p) in items {
            acc.add(t, x, p);
        }
        acc.finish(0.0)
    }

    /// Mass dropped by tail truncation while building this table.
    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    pub fn get(&self, t: i64, x: i64) -> f64 {
        self.rows
            .get(&t)
            .and_then(|r| {
                let i = x - r.x0;
                (i >= 0)
                    .then(|| r.values.get(i as usize).copied())
                    .flatten()
            })
            .unwrap_or(0.0)
    }

    /// `(x0, values)` of row `t`, where `values[i]` is the mass at `x0 + i`.
    pub fn row(&self, t: i64) -> Option<(i64, &[f64])> {
        self.rows.get(&t).map(|r| (r.x0, r.values.as_slice()))
    }

    pub fn times(&self) -> impl Iterator<Item = i64> + '_ {
        self.rows.keys().copied()
    }

    /// Non-zero entries in `(t, x)` order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        self.rows.iter().flat_map(|(&t, r)| {
            r.values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(move |(i, &v)| (t, r.x0 + i as i64, v))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(|r| r.values.len()).sum()
    }

    pub fn total_mass(&self) -> f64 {
        crate::numeric::compensated_sum(self.rows.values().flat_map(|r| r.values.iter().copied()))
    }

    /// Convolution with a finite atom list, keeping rows with `t <= t_max`.
    /// Atoms are applied in order so the result is deterministic.
    pub fn convolve(&self, atoms: &[Atom], t_max: i64) -> SparsePmf {
        let mut ranges: BTreeMap<i64, (i64, i64)> = BTreeMap::new();
        for (&t, r) in &self.rows {
            let len = r.values.len() as i64;
            for a in atoms {
                let tt = t + a.t;
                if tt <= t_max {
                    extend_range(&mut ranges, tt, r.x0 + a.z, r.x0 + a.z + len - 1);
                }
            }
        }
        let mut acc = SparseAccumulator::default();
        acc.reserve(&ranges);
        for (&t, r) in &self.rows {
            for a in atoms {
                let tt = t + a.t;
                if tt > t_max {
                    continue;
                }
                acc.add_row(tt, r.x0 + a.z, &r.values, a.p);
            }
        }
        acc.finish(self.truncation_mass)
    }

    /// Convolution of two tables.
    pub fn convolve_pmf(&self, other: &SparsePmf, t_max: i64) -> SparsePmf {
        let atoms: Vec<Atom> = other.iter().map(|(t, z, p)| Atom::new(t, z, p)).collect();
        let mut out = self.convolve(&atoms, t_max);
        out.truncation_mass = 1.0 - (1.0 - self.truncation_mass) * (1.0 - other.truncation_mass);
        out
    }

    pub(crate) fn set_truncation_mass(&mut self, mass: f64) {
        self.truncation_mass = mass;
    }
}

fn extend_range(ranges: &mut BTreeMap<i64, (i64, i64)>, t: i64, lo: i64, hi: i64) {
    ranges
        .entry(t)
        .and_modify(|r| {
            r.0 = r.0.min(lo);
            r.1 = r.1.max(hi);
        })
        .or_insert((lo, hi));
}

/// Row-wise Neumaier accumulation into preallocated ranges.
#[derive(Debug, Default)]
pub(crate) struct SparseAccumulator {
    rows: BTreeMap<i64, AccRow>,
}

#[derive(Debug)]
struct AccRow {
    x0: i64,
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl AccRow {
    fn new(lo: i64, hi: i64) -> Self {
        let n = (hi - lo + 1) as usize;
        Self {
            x0: lo,
            sum: vec![0.0; n],
            comp: vec![0.0; n],
        }
    }

    fn widen(&mut self, lo: i64, hi: i64) {
        let cur_hi = self.x0 + self.sum.len() as i64 - 1;
        if lo >= self.x0 && hi <= cur_hi {
            return;
        }
        let new_lo = lo.min(self.x0);
        let new_hi = hi.max(cur_hi);
        let mut next = AccRow::new(new_lo, new_hi);
        let off = (self.x0 - new_lo) as usize;
        next.sum[off..off + self.sum.len()].copy_from_slice(&self.sum);
        next.comp[off..off + self.comp.len()].copy_from_slice(&self.comp);
        *self = next;
    }

    #[inline]
    fn add_at(&mut self, i: usize, v: f64) {
        let s = self.sum[i];
        let t = s + v;
        if s.abs() >= v.abs() {
            self.comp[i] += (s - t) + v;
        } else {
            self.comp[i] += (v - t) + s;
        }
        self.sum[i] = t;
    }
}

impl SparseAccumulator {
    pub(crate) fn reserve(&mut self, ranges: &BTreeMap<i64, (i64, i64)>) {
        for (&t, &(lo, hi)) in ranges {
            match self.rows.get_mut(&t) {
                Some(r) => r.widen(lo, hi),
                None => {
                    self.rows.insert(t, AccRow::new(lo, hi));
                }
            }
        }
    }

    pub(crate) fn add(&mut self, t: i64, x: i64, v: f64) {
        let row = self.rows.entry(t).or_insert_with(|| AccRow::new(x, x));
        row.widen(x, x);
        let i = (x - row.x0) as usize;
        row.add_at(i, v);
    }

    pub(crate) fn add_row(&mut self, t: i64, x0: i64, values: &[f64], scale: f64) {
        if values.is_empty() {
            return;
        }
        let row = self
            .rows
            .entry(t)
            .or_insert_with(|| AccRow::new(x0, x0 + values.len() as i64 - 1));
        row.widen(x0, x0 + values.len() as i64 - 1);
        let off = (x0 - row.x0) as usize;
        for (i, v) in values.iter().enumerate() {
            row.add_at(off + i, v * scale);
        }
    }

    pub(crate) fn add_pmf(&mut self, pmf: &SparsePmf) {
        for (&t, r) in &pmf.rows {
            self.add_row(t, r.x0, &r.values, 1.0);
        }
    }

    pub(crate) fn finish(self, truncation_mass: f64) -> SparsePmf {
        let rows = self
            .rows
            .into_iter()
            .filter_map(|(t, r)| {
                let values: Vec<f64> = r.sum.iter().zip(&r.comp).map(|(s, c)| s + c).collect();
                // Trim zero ends so rows stay tight.
                let first = values.iter().position(|v| *v != 0.0)?;
                let last = values.iter().rposition(|v| *v != 0.0)?;
                Some((
                    t,
                    Row {
                        x0: r.x0 + first as i64,
                        values: values[first..=last].to_vec(),
                    },
                ))
            })
            .collect();
        SparsePmf {
            rows,
            truncation_mass,
        }
    }
}
