//! Simulation studies: estimator performance under a PLA truth and
//! robustness (absolute integrated error) under other parent processes.

use crate::data::LoadShareData;
use crate::error::{Error, Result};
use crate::estimation::{fit, Anchor, FitConfig, GridPolicy};
use crate::model::{CutGrid, PlaModel, PlaParams};
use crate::quadrature::{integrate, QuadConfig};
use crate::rng::{child_seed, stream};
use crate::uncertainty::{asymptotic_ci, bootstrap, observed_information, BootstrapConfig, IntervalSet};
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Weibull};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum ParentProcess {
    Pla(PlaModel),
    /// Two Weibull(`shape`, `scale`) components; the survivor's lifetime after
    /// the first failure is Weibull(`shape`, `inflation·scale`).
    WeibullInflate {
        shape: f64,
        scale: f64,
        inflation: f64,
        /// Continue the survivor's cumulative hazard from its age instead of
        /// drawing a fresh lifetime.
        residual: bool,
    },
    /// Component cumulative hazards `k1·t + k2·t²` before and `kt1·t + kt2·t²`
    /// after the first failure.
    QuadraticChf { k1: f64, k2: f64, kt1: f64, kt2: f64 },
}

impl ParentProcess {
    pub fn weibull(shape: f64, scale: f64, inflation: f64) -> Result<Self> {
        let p = Self::WeibullInflate {
            shape,
            scale,
            inflation,
            residual: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn quadratic(k1: f64, k2: f64, kt1: f64, kt2: f64) -> Result<Self> {
        let p = Self::QuadraticChf { k1, k2, kt1, kt2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Pla(_) => Ok(()),
            Self::WeibullInflate { shape, scale, inflation, .. } => {
                if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "Weibull shape and scale must be positive, got ({shape}, {scale})"
                    )));
                }
                if !(inflation > 2.0 && inflation.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "inflation factor must exceed 2, got {inflation}"
                    )));
                }
                Ok(())
            }
            Self::QuadraticChf { k1, k2, kt1, kt2 } => {
                let ok = |a: f64, c: f64| a >= 0.0 && c >= 0.0 && a + c > 0.0 && (a + c).is_finite();
                if !(ok(k1, k2) && ok(kt1, kt2)) {
                    return Err(Error::InvalidParams(
                        "quadratic coefficients must be nonnegative and not both zero".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Self::Pla(m) => m.components(),
            _ => 2,
        }
    }

    /// Cumulative hazard of one surviving component during stage `j`.
    pub fn component_chf(&self, j: usize, t: f64) -> Result<f64> {
        match *self {
            Self::Pla(ref m) => {
                let tau0 = m.grid().stage(j)[0];
                if t <= tau0 {
                    Ok(0.0)
                } else {
                    m.cum_hazard(j, t)
                }
            }
            Self::WeibullInflate { shape, scale, inflation, residual } => {
                if residual && j == 1 {
                    return Err(Error::InvalidParams(
                        "the residual-lifetime variant has no single stage-1 hazard".into(),
                    ));
                }
                let s = if j == 0 { scale } else { inflation * scale };
                Ok((t / s).powf(shape))
            }
            Self::QuadraticChf { k1, k2, kt1, kt2 } => {
                let (a, c) = if j == 0 { (k1, k2) } else { (kt1, kt2) };
                Ok(a * t + c * t * t)
            }
        }
    }
}

/// Positive root of `a·y + c·y² = e`, written to stay accurate as `c → 0`.
pub fn invert_quadratic_chf(a: f64, c: f64, e: f64) -> f64 {
    2.0 * e / (a + (a * a + 4.0 * c * e).sqrt())
}

fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln()
}

/// One system's stage gaps.
pub fn generate_system<R: Rng + ?Sized>(parent: &ParentProcess, rng: &mut R) -> Result<Vec<f64>> {
    match *parent {
        ParentProcess::Pla(ref m) => Ok(m.sample_system(rng).gaps),
        ParentProcess::WeibullInflate { shape, scale, inflation, residual } => {
            let first = Weibull::new(scale, shape).map_err(|e| Error::InvalidParams(e.to_string()))?;
            let y0 = first.sample(rng).min(first.sample(rng));
            let s1 = inflation * scale;
            let y1 = if residual {
                s1 * ((y0 / s1).powf(shape) + unit_exponential(rng)).powf(1.0 / shape) - y0
            } else {
                Weibull::new(s1, shape)
                    .map_err(|e| Error::InvalidParams(e.to_string()))?
                    .sample(rng)
            };
            Ok(vec![y0, y1])
        }
        ParentProcess::QuadraticChf { k1, k2, kt1, kt2 } => {
            let y0 = invert_quadratic_chf(k1, k2, unit_exponential(rng) / 2.0);
            let y1 = invert_quadratic_chf(kt1, kt2, unit_exponential(rng));
            Ok(vec![y0, y1])
        }
    }
}

pub fn generate<R: Rng + ?Sized>(parent: &ParentProcess, n: usize, rng: &mut R) -> Result<LoadShareData> {
    parent.validate()?;
    let rows = (0..n)
        .map(|_| generate_system(parent, rng))
        .collect::<Result<Vec<_>>>()?;
    LoadShareData::from_rows(&rows)
}

/// How each simulated dataset is gridded before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StudyGrid {
    /// Likelihood-based interior knot over the `(p1, p2)` quantile window.
    Select { p1: f64, p2: f64 },
    /// The generating knots, anchored at zero.
    TrueKnots,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub n: usize,
    pub reps: usize,
    pub slopes: [f64; 2],
    pub gamma: f64,
    pub level: f64,
    pub seed: u64,
    pub grid: StudyGrid,
    /// Bootstrap replicates per dataset; `None` skips the bootstrap intervals.
    pub bootstrap: Option<usize>,
}

impl StudyConfig {
    /// Design with true knots `ln 2/(2 b_1)` and `ln 2/(γ b_1)`.
    pub fn new(n: usize, reps: usize, slopes: [f64; 2], gamma: f64, seed: u64) -> Self {
        Self {
            n,
            reps,
            slopes,
            gamma,
            level: 0.95,
            seed,
            grid: StudyGrid::Select { p1: 0.2, p2: 0.8 },
            bootstrap: None,
        }
    }

    pub fn true_knots(&self) -> [f64; 2] {
        let ln2 = std::f64::consts::LN_2;
        [ln2 / (2.0 * self.slopes[0]), ln2 / (self.gamma * self.slopes[0])]
    }

    pub fn truth(&self) -> Result<PlaModel> {
        let [k0, k1] = self.true_knots();
        let grid = CutGrid::new(vec![vec![0.0, k0, 2.0 * k0], vec![0.0, k1, 2.0 * k1]])?;
        PlaModel::new(grid, PlaParams::new(self.slopes.to_vec(), vec![self.gamma])?)
    }

    pub fn fit_config(&self) -> FitConfig {
        match self.grid {
            StudyGrid::Select { p1, p2 } => FitConfig {
                grid: GridPolicy::Select { p1, p2 },
                ..FitConfig::default()
            },
            StudyGrid::TrueKnots => {
                let [k0, k1] = self.true_knots();
                FitConfig {
                    grid: GridPolicy::Interior(vec![vec![k0], vec![k1]]),
                    anchor: Anchor::Zero,
                    ..FitConfig::default()
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::InvalidParams("reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidProbability(self.level));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub parameter: String,
    pub truth: f64,
    pub ae: f64,
    pub mse: f64,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub parameter: String,
    pub method: String,
    /// Percent of intervals containing the truth.
    pub cp: f64,
    pub al: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceTable {
    pub config: StudyConfig,
    pub estimates: Vec<EstimateRow>,
    pub coverage: Vec<CoverageRow>,
    pub completed: usize,
    pub failed: usize,
}

impl PerformanceTable {
    pub fn estimate(&self, name: &str) -> Option<&EstimateRow> {
        self.estimates.iter().find(|r| r.parameter == name)
    }

    pub fn coverage_of(&self, name: &str, method: &str) -> Option<&CoverageRow> {
        self.coverage.iter().find(|r| r.parameter == name && r.method == method)
    }

    /// One row per parameter with AE/MSE/VAR then CP/AL per interval method.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let methods: Vec<String> = {
            let mut m: Vec<String> = self.coverage.iter().map(|c| c.method.clone()).collect();
            m.dedup();
            m
        };
        let mut header: Vec<String> = ["n", "b1", "b2", "gamma1", "parameter", "AE", "MSE", "VAR"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for m in &methods {
            header.push(format!("CP_{m}"));
            header.push(format!("AL_{m}"));
        }
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        let c = &self.config;
        for e in &self.estimates {
            let mut row = vec![
                c.n.to_string(),
                c.slopes[0].to_string(),
                c.slopes[1].to_string(),
                c.gamma.to_string(),
                e.parameter.clone(),
                format!("{:.6}", e.ae),
                format!("{:.6}", e.mse),
                format!("{:.6}", e.var),
            ];
            for m in &methods {
                match self.coverage_of(&e.parameter, m) {
                    Some(r) => {
                        row.push(format!("{:.2}", r.cp));
                        row.push(format!("{:.6}", r.al));
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

struct RepOutcome {
    theta: Vec<f64>,
    intervals: Vec<IntervalSet>,
}

fn one_rep(cfg: &StudyConfig, truth: &PlaModel, fit_cfg: &FitConfig, r: usize) -> Result<RepOutcome> {
    let mut rng = stream(cfg.seed, r as u64);
    let data = generate(&ParentProcess::Pla(truth.clone()), cfg.n, &mut rng)?;
    let f = fit(&data, fit_cfg)?;
    let info = observed_information(&f.stats, f.model.params())?;
    let mut intervals = vec![asymptotic_ci(&f, &info, cfg.level)?];
    if let Some(b) = cfg.bootstrap {
        let bc = BootstrapConfig {
            replicates: b,
            level: cfg.level,
            seed: child_seed(cfg.seed, r as u64),
            fit: fit_cfg.clone(),
            ..BootstrapConfig::default()
        };
        let res = bootstrap(&data, &f, &bc)?;
        intervals.push(res.normal);
        intervals.push(res.percentile);
    }
    Ok(RepOutcome {
        theta: f.theta(),
        intervals,
    })
}

/// AE, MSE and VAR = MSE − bias² of each estimate; CP and AL of each interval method.
pub fn run_performance_study(cfg: &StudyConfig) -> Result<PerformanceTable> {
    cfg.validate()?;
    let truth = cfg.truth()?;
    let fit_cfg = cfg.fit_config();
    let outcomes: Vec<Result<RepOutcome>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| one_rep(cfg, &truth, &fit_cfg, r))
        .collect();
    let ok: Vec<RepOutcome> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
    let failed = cfg.reps - ok.len();
    if ok.is_empty() {
        return Err(Error::Degenerate("every replicate failed to fit".into()));
    }
    let names = ["gamma1", "b1", "b2"];
    let truth_theta = [cfg.gamma, cfg.slopes[0], cfg.slopes[1]];
    let m = ok.len() as f64;
    let estimates = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let ae = ok.iter().map(|o| o.theta[i]).sum::<f64>() / m;
            let mse = ok.iter().map(|o| (o.theta[i] - truth_theta[i]).powi(2)).sum::<f64>() / m;
            let bias = ae - truth_theta[i];
            EstimateRow {
                parameter: name.to_string(),
                truth: truth_theta[i],
                ae,
                mse,
                var: mse - bias * bias,
            }
        })
        .collect();
    let mut coverage = Vec::new();
    let n_methods = ok[0].intervals.len();
    for mi in 0..n_methods {
        let method = serde_json::to_value(ok[0].intervals[mi].method)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        for (i, name) in names.iter().enumerate() {
            let (mut hit, mut len) = (0usize, 0.0);
            for o in &ok {
                let iv = &o.intervals[mi].intervals[i];
                if iv.lower <= truth_theta[i] && truth_theta[i] <= iv.upper {
                    hit += 1;
                }
                len += iv.upper - iv.lower;
            }
            coverage.push(CoverageRow {
                parameter: name.to_string(),
                method: method.clone(),
                cp: 100.0 * hit as f64 / m,
                al: len / m,
                count: ok.len(),
            });
        }
    }
    Ok(PerformanceTable {
        config: cfg.clone(),
        estimates,
        coverage,
        completed: ok.len(),
        failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AieResult {
    pub sf: Vec<f64>,
    pub chf: Vec<f64>,
}

/// Normalized `L1` distance between the parent's and the fitted component
/// survival and cumulative hazard over each stage's observed range.
pub fn aie(data: &LoadShareData, fitted: &PlaModel, parent: &ParentProcess) -> Result<AieResult> {
    let cfg = QuadConfig {
        abs_tol: 1e-8,
        rel_tol: 1e-10,
        max_panels: 20_000,
    };
    let fit_chf = |j: usize, t: f64| -> f64 {
        if t <= fitted.grid().stage(j)[0] {
            0.0
        } else {
            fitted.cum_hazard(j, t).unwrap_or(f64::NAN)
        }
    };
    let mut sf = Vec::new();
    let mut chf = Vec::new();
    for j in 0..data.components() {
        parent.component_chf(j, 1.0)?;
        let (lo, hi) = (data.min(j), data.max(j));
        if hi <= lo {
            return Err(Error::Degenerate(format!("stage {j} has no spread")));
        }
        let kinks = fitted.grid().stage(j);
        let truth = |t: f64| parent.component_chf(j, t).unwrap_or(f64::NAN);
        let s = integrate(|t| ((-truth(t)).exp() - (-fit_chf(j, t)).exp()).abs(), lo, hi, kinks, cfg)?;
        let c = integrate(|t| (truth(t) - fit_chf(j, t)).abs(), lo, hi, kinks, cfg)?;
        if !(s.is_finite() && c.is_finite()) {
            return Err(Error::Quadrature(format!("non-finite integrated error at stage {j}")));
        }
        sf.push(s / (hi - lo));
        chf.push(c / (hi - lo));
    }
    Ok(AieResult { sf, chf })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessTable {
    pub config: RobustnessConfig,
    /// Mean over replicates, per stage.
    pub sf: Vec<f64>,
    pub chf: Vec<f64>,
    pub completed: usize,
    pub failed: usize,
}

impl RobustnessTable {
    pub fn write_csv<W: Write>(&self, label: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["parent".to_string(), "n".to_string()];
        for j in 0..self.sf.len() {
            header.push(format!("AIE_SF{j}"));
        }
        for j in 0..self.chf.len() {
            header.push(format!("AIE_CHF{j}"));
        }
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        let mut row = vec![label.to_string(), self.config.n.to_string()];
        row.extend(self.sf.iter().chain(&self.chf).map(|v| format!("{v:.6}")));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        w.flush()?;
        Ok(())
    }
}

/// Mean AIE over `reps` datasets from `parent`, each fitted with a selected two-piece grid.
pub fn run_robustness_study(parent: &ParentProcess, cfg: &RobustnessConfig) -> Result<RobustnessTable> {
    parent.validate()?;
    if cfg.reps < 1 {
        return Err(Error::InvalidParams("reps must be at least 1".into()));
    }
    let fit_cfg = FitConfig {
        grid: GridPolicy::Select { p1: cfg.p1, p2: cfg.p2 },
        ..FitConfig::default()
    };
    let results: Vec<Result<AieResult>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, r as u64);
            let data = generate(parent, cfg.n, &mut rng)?;
            let f = fit(&data, &fit_cfg)?;
            aie(&data, &f.model, parent)
        })
        .collect();
    let ok: Vec<AieResult> = results.into_iter().filter_map(|r| r.ok()).collect();
    if ok.is_empty() {
        return Err(Error::Degenerate("every replicate failed".into()));
    }
    let m = ok.len() as f64;
    let jj = parent.components();
    let mean = |pick: fn(&AieResult) -> &Vec<f64>| -> Vec<f64> {
        (0..jj).map(|j| ok.iter().map(|a| pick(a)[j]).sum::<f64>() / m).collect()
    };
    Ok(RobustnessTable {
        config: cfg.clone(),
        sf: mean(|a| &a.sf),
        chf: mean(|a| &a.chf),
        completed: ok.len(),
        failed: cfg.reps - ok.len(),
    })
}
