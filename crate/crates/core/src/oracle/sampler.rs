use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Condition, CrpError, Result};
use crate::lattice_model::{CrpModel, JumpDistribution};
use crate::second_deviation::rate_point;

/// Paths per independently seeded block.
pub const SIMULATION_BLOCK: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingMode {
    Naive,
    /// Exponential tilt by the saddle point `(lambda(alpha), mu(alpha))`.
    Tilted {
        alpha: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub n: u64,
    pub paths: u64,
    pub mode: SamplingMode,
    pub cells: BTreeMap<i64, CellEstimate>,
}

impl SimulationResult {
    pub fn get(&self, x: i64) -> CellEstimate {
        self.cells.get(&x).copied().unwrap_or(CellEstimate {
            estimate: 0.0,
            std_error: 0.0,
        })
    }
}

/// Draws jumps under the law tilted by `(lambda, mu)` and returns each draw's
/// log likelihood ratio `A - lambda t - mu z`.
struct JumpSampler {
    atoms: Vec<(i64, i64)>,
    tail: Option<TailSampler>,
    index: WeightedAliasIndex<f64>,
    lambda: f64,
    mu: f64,
    log_psi: f64,
}

struct TailSampler {
    k0: i64,
    z0: i64,
    slope: i64,
    ln_ratio: f64,
}

impl JumpSampler {
    fn new(dist: &JumpDistribution, lambda: f64, mu: f64) -> Result<Self> {
        let tp = dist.cgf(lambda, mu)?;
        let mut weights: Vec<f64> = dist
            .atoms()
            .iter()
            .map(|a| (a.p.ln() + lambda * a.t as f64 + mu * a.z as f64 - tp.value).exp())
            .collect();
        let atoms = dist.atoms().iter().map(|a| (a.t, a.z)).collect();
        let tail = dist.tail().map(|t| {
            let ln_ratio = t.q.ln() + lambda + mu * t.slope as f64;
            let log_mass = t.c.ln() + mu * t.z0 as f64 + t.k0 as f64 * (t.q.ln() + lambda)
                - (-ln_ratio.exp_m1()).ln();
            weights.push((log_mass - tp.value).exp());
            TailSampler {
                k0: t.k0,
                z0: t.z0,
                slope: t.slope,
                ln_ratio,
            }
        });
        let index = WeightedAliasIndex::new(weights)
            .map_err(|e| CrpError::Numerical(format!("alias table: {e}")))?;
        Ok(Self {
            atoms,
            tail,
            index,
            lambda,
            mu,
            log_psi: tp.value,
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (i64, i64, f64) {
        let i = self.index.sample(rng);
        let (t, z) = match self.atoms.get(i) {
            Some(&p) => p,
            None => {
                let tail = self.tail.as_ref().expect("alias index past atoms");
                // Geometric offset by inversion; 1 - u lies in (0, 1].
                let u: f64 = 1.0 - rng.random::<f64>();
                let j = (u.ln() / tail.ln_ratio).floor() as i64;
                (tail.k0 + j, tail.z0 + tail.slope * j)
            }
        };
        let lw = self.log_psi - self.lambda * t as f64 - self.mu * z as f64;
        (t, z, lw)
    }
}

/// Monte Carlo estimate of `P(Z(n) = x)` for every visited `x`.
///
/// Paths are split into blocks of [`SIMULATION_BLOCK`]; block `b` uses
/// ChaCha8 seeded with `seed` on stream `b`, so results do not depend on the
/// thread count.
pub fn simulate(
    model: &CrpModel,
    n: u64,
    paths: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<SimulationResult> {
    if paths == 0 {
        return Err(CrpError::InvalidModel("paths must be positive".into()));
    }
    let (lambda, mu) = match mode {
        SamplingMode::Naive => (0.0, 0.0),
        SamplingMode::Tilted { alpha } => {
            let rp = rate_point(model.step(), alpha)?;
            (rp.lambda_alpha, rp.mu_alpha)
        }
    };
    let step = JumpSampler::new(model.step(), lambda, mu)?;
    let first = JumpSampler::new(model.first(), lambda, mu).map_err(|e| match e {
        CrpError::OutsideCumulantDomain { .. } => CrpError::ConditionViolated {
            condition: Condition::Heterogeneity,
            detail: format!("first-jump transform is infinite at lambda = {lambda}"),
        },
        other => other,
    })?;
    let blocks = paths.div_ceil(SIMULATION_BLOCK);
    let n = n as i64;
    let per_block: Vec<BTreeMap<i64, (f64, f64)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = SIMULATION_BLOCK.min(paths - b * SIMULATION_BLOCK);
            let mut cells: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
            for _ in 0..count {
                let (x, lw) = sample_path(&first, &step, n, &mut rng);
                let w = lw.exp();
                let c = cells.entry(x).or_insert((0.0, 0.0));
                c.0 += w;
                c.1 += w * w;
            }
            cells
        })
        .collect();
    let mut totals: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for block in per_block {
        for (x, (s1, s2)) in block {
            let c = totals.entry(x).or_insert((0.0, 0.0));
            c.0 += s1;
            c.1 += s2;
        }
    }
    let np = paths as f64;
    let cells = totals
        .into_iter()
        .map(|(x, (s1, s2))| {
            let mean = s1 / np;
            let var = if paths > 1 {
                ((s2 - np * mean * mean) / (np - 1.0)).max(0.0)
            } else {
                0.0
            };
            (
                x,
                CellEstimate {
                    estimate: mean,
                    std_error: (var / np).sqrt(),
                },
            )
        })
        .collect();
    Ok(SimulationResult {
        n: n as u64,
        paths,
        mode,
        cells,
    })
}

fn sample_path<R: Rng>(first: &JumpSampler, step: &JumpSampler, n: i64, rng: &mut R) -> (i64, f64) {
    if n == 0 {
        return (0, 0.0);
    }
    let (t, z, mut lw) = first.sample(rng);
    if t >= n {
        return (0, lw);
    }
    let mut time = t;
    let mut x = z;
    loop {
        let (t, z, l) = step.sample(rng);
        lw += l;
        time += t;
        if time >= n {
            return (x, lw);
        }
        x += z;
    }
}
