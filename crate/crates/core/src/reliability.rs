//! Reliability characteristics of the system lifetime `T = Σ_j Y^{(j)}`.

use crate::error::{Error, Result};
use crate::model::PlaModel;
use crate::rng::{child_seed, stream};
use rayon::prelude::*;
use std::io::Write;

/// Draws per parallel block; blocks use streams `(seed, block)`.
const BLOCK: usize = 1 << 14;

/// `κ_{j,s} = (J − j) γ_j Σ_{ℓ≤s} b_ℓ (τ_ℓ − τ_{ℓ−1})`, `s = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaTable {
    pub kappa: Vec<Vec<f64>>,
}

impl KappaTable {
    pub fn new(model: &PlaModel) -> Self {
        let kappa = (0..model.components())
            .map(|j| {
                let m = model.stage_multiplier(j);
                model.knot_base_cum(j).iter().map(|c| m * c).collect()
            })
            .collect();
        Self { kappa }
    }
}

/// Mean of one stage: `τ_0 + Σ_{s<N} (e^{−κ_{s−1}} − e^{−κ_s})/r_s + e^{−κ_{N−1}}/r_N`.
pub fn stage_mean(model: &PlaModel, j: usize) -> f64 {
    let kt = KappaTable::new(model);
    stage_mean_with(model, &kt, j)
}

fn stage_mean_with(model: &PlaModel, kt: &KappaTable, j: usize) -> f64 {
    let nn = model.pieces();
    let m = model.stage_multiplier(j);
    let k = &kt.kappa[j];
    let mut total = model.grid().stage(j)[0];
    for s in 0..nn {
        let rate = m * model.params().slopes[s];
        let leave = if s + 1 == nn { 0.0 } else { (-k[s + 1]).exp() };
        total += ((-k[s]).exp() - leave) / rate;
    }
    total
}

/// Mean time to system failure.
pub fn mttf(model: &PlaModel) -> f64 {
    let kt = KappaTable::new(model);
    (0..model.components())
        .map(|j| stage_mean_with(model, &kt, j))
        .sum()
}

/// Upper bound (exclusive) on the MGF argument: `min_j (J − j) γ_j b_N`.
pub fn mgf_bound(model: &PlaModel) -> f64 {
    let bn = *model.params().slopes.last().expect("at least one slope");
    (0..model.components())
        .map(|j| model.stage_multiplier(j) * bn)
        .fold(f64::INFINITY, f64::min)
}

/// `(e^{xΔ} − 1)/x`, continuous through `x = 0`.
fn growth(x: f64, delta: f64) -> f64 {
    let z = x * delta;
    if z.abs() < 1e-12 {
        delta * (1.0 + 0.5 * z)
    } else {
        z.exp_m1() / x
    }
}

/// Moment generating function `E e^{tT}` for `t < mgf_bound(model)`.
pub fn mgf(model: &PlaModel, t: f64) -> Result<f64> {
    let bound = mgf_bound(model);
    if !(t < bound) {
        return Err(Error::Domain(format!(
            "moment generating function needs t < {bound}, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let kt = KappaTable::new(model);
    let nn = model.pieces();
    let mut prod = 1.0;
    for j in 0..model.components() {
        let m = model.stage_multiplier(j);
        let taus = model.grid().stage(j);
        let k = &kt.kappa[j];
        let mut phi = 0.0;
        for s in 0..nn {
            let rate = m * model.params().slopes[s];
            let head = rate * (t * taus[s] - k[s]).exp();
            phi += if s + 1 == nn {
                head / (rate - t)
            } else {
                head * growth(t - rate, taus[s + 1] - taus[s])
            };
        }
        prod *= phi;
    }
    Ok(prod)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replications: usize,
    pub seed: u64,
}

fn blocks(total: usize) -> Vec<(u64, usize)> {
    (0..total.div_ceil(BLOCK))
        .map(|b| (b as u64, BLOCK.min(total - b * BLOCK)))
        .collect()
}

/// Reliability at mission time, `P(T > t0)`, from `reps` simulated systems.
pub fn rmt_mc(model: &PlaModel, t0: f64, reps: usize, seed: u64) -> Result<McEstimate> {
    if reps < 1000 {
        return Err(Error::InvalidParams(format!("need at least 1000 replications, got {reps}")));
    }
    if !(t0 >= 0.0) {
        return Err(Error::Domain(format!("mission time {t0} must be nonnegative")));
    }
    let survived: usize = blocks(reps)
        .into_par_iter()
        .map(|(b, size)| {
            let mut rng = stream(seed, b);
            (0..size).filter(|_| model.sample_lifetime(&mut rng) > t0).count()
        })
        .sum();
    let v = survived as f64 / reps as f64;
    Ok(McEstimate {
        value: v,
        std_error: (v * (1.0 - v) / reps as f64).sqrt(),
        replications: reps,
        seed,
    })
}

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        let count = self.count + o.count;
        let delta = o.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * o.count / count,
            m2: self.m2 + o.m2 + delta * delta * self.count * o.count / count,
        }
    }
}

/// Mean residual time `E(T − t | T > t)` from `reps` accepted draws of `T | T > t`.
///
/// Draws are kept only if they exceed `t`; the run aborts if the acceptance
/// rate of a block falls below `min_acceptance`.
pub fn mrt_mc(model: &PlaModel, t: f64, reps: usize, seed: u64) -> Result<McEstimate> {
    mrt_mc_with_floor(model, t, reps, seed, 1e-4)
}

pub fn mrt_mc_with_floor(
    model: &PlaModel,
    t: f64,
    reps: usize,
    seed: u64,
    min_acceptance: f64,
) -> Result<McEstimate> {
    if reps < 1000 {
        return Err(Error::InvalidParams(format!("need at least 1000 replications, got {reps}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time {t} must be nonnegative")));
    }
    let parts: Vec<Result<Moments>> = blocks(reps)
        .into_par_iter()
        .map(|(b, size)| {
            let mut rng = stream(seed, b);
            let cap = (size as f64 / min_acceptance).ceil() as u64;
            let mut draws = 0u64;
            let mut acc = Moments { count: 0.0, mean: 0.0, m2: 0.0 };
            while (acc.count as usize) < size {
                if draws >= cap {
                    return Err(Error::AcceptanceStarvation {
                        rate: acc.count / draws as f64,
                        floor: min_acceptance,
                    });
                }
                draws += 1;
                let life = model.sample_lifetime(&mut rng);
                if life > t {
                    let x = life - t;
                    acc.count += 1.0;
                    let d = x - acc.mean;
                    acc.mean += d / acc.count;
                    acc.m2 += d * (x - acc.mean);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total: Option<Moments> = None;
    for p in parts {
        let p = p?;
        total = Some(match total {
            None => p,
            Some(t) => t.merge(p),
        });
    }
    let m = total.expect("at least one block");
    let sd = (m.m2 / (m.count - 1.0)).sqrt();
    Ok(McEstimate {
        value: m.mean,
        std_error: sd / m.count.sqrt(),
        replications: reps,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ReliabilityRow {
    pub t0: f64,
    pub rmt: f64,
    pub rmt_se: f64,
    pub mrt: f64,
    pub mrt_se: f64,
    #[serde(rename = "R")]
    pub reps: usize,
    pub seed: u64,
}

/// RMT and MRT at each mission time; time `i` uses child seeds `2i` and `2i + 1`.
pub fn reliability_table(model: &PlaModel, times: &[f64], reps: usize, seed: u64) -> Result<Vec<ReliabilityRow>> {
    times
        .iter()
        .enumerate()
        .map(|(i, &t0)| {
            let r = rmt_mc(model, t0, reps, child_seed(seed, 2 * i as u64))?;
            let m = mrt_mc(model, t0, reps, child_seed(seed, 2 * i as u64 + 1))?;
            Ok(ReliabilityRow {
                t0,
                rmt: r.value,
                rmt_se: r.std_error,
                mrt: m.value,
                mrt_se: m.std_error,
                reps,
                seed,
            })
        })
        .collect()
}

pub fn write_reliability_csv<W: Write>(rows: &[ReliabilityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
