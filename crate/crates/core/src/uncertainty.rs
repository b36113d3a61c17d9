//! Information matrices, Wald intervals and bootstrap intervals.

use crate::data::LoadShareData;
use crate::error::{Error, Result};
use crate::estimation::{fit, FitConfig, FitResult, SufficientStats};
use crate::model::{PlaModel, PlaParams};
use crate::rng::stream;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoKind {
    Observed,
    Expected,
}

/// Information matrix in the parameter order `(γ_1, …, γ_{J−1}, b_1, …, b_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub entries: DMatrix<f64>,
}

impl InfoMatrix {
    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.entries.clone().cholesky().is_some()
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let det = self.determinant();
        if !(det.is_finite() && det > 0.0) {
            return Err(Error::SingularInformation { determinant: det });
        }
        self.entries
            .clone()
            .try_inverse()
            .ok_or(Error::SingularInformation { determinant: det })
    }

    /// Square roots of the inverse-information diagonal.
    pub fn standard_errors(&self) -> Result<Vec<f64>> {
        let cov = self.covariance()?;
        (0..self.order())
            .map(|i| {
                let v = cov[(i, i)];
                if v > 0.0 && v.is_finite() {
                    Ok(v.sqrt())
                } else {
                    Err(Error::NonFinite(format!("variance {v} for parameter {i}")))
                }
            })
            .collect()
    }
}

// information assembled from (possibly expected) counts N_k and exposures T_k^{(j)}
fn assemble(
    params: &PlaParams,
    n: f64,
    counts: &[f64],
    exposure: impl Fn(usize, usize) -> f64,
    kind: InfoKind,
) -> InfoMatrix {
    let m = params.gammas.len();
    let nn = params.slopes.len();
    let jj = m + 1;
    let p = m + nn;
    let mut e = DMatrix::zeros(p, p);
    for a in 0..m {
        e[(a, a)] = n / params.gammas[a].powi(2);
        let j = a + 1;
        for k in 0..nn {
            let v = (jj - j) as f64 * exposure(j, k);
            e[(a, m + k)] = v;
            e[(m + k, a)] = v;
        }
    }
    for k in 0..nn {
        e[(m + k, m + k)] = counts[k] / params.slopes[k].powi(2);
    }
    InfoMatrix { kind, entries: e }
}

/// Negative Hessian of the log-likelihood at `params`, in closed form.
///
/// Slopes are mutually uncorrelated in the Hessian; each `γ_j`–`b_k` entry is
/// `(J − j) T_k^{(j)}`.
pub fn observed_information(stats: &SufficientStats, params: &PlaParams) -> Result<InfoMatrix> {
    check_interior(params)?;
    if params.slopes.len() != stats.pieces() || params.gammas.len() + 1 != stats.components() {
        return Err(Error::InvalidParams("parameters do not match the statistics".into()));
    }
    let counts: Vec<f64> = (0..stats.pieces()).map(|k| stats.piece_count(k) as f64).collect();
    let info = assemble(
        params,
        stats.n() as f64,
        &counts,
        |j, k| stats.exposure(j, k),
        InfoKind::Observed,
    );
    if info.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observed information".into()));
    }
    Ok(info)
}

/// Central-difference negative Hessian of the log-likelihood (relative step `rel_step`).
pub fn observed_information_numeric(
    stats: &SufficientStats,
    params: &PlaParams,
    rel_step: f64,
) -> Result<InfoMatrix> {
    check_interior(params)?;
    let m = params.gammas.len();
    let theta: Vec<f64> = params.gammas.iter().chain(&params.slopes).copied().collect();
    let p = theta.len();
    // ℓ(t) − ℓ(θ), accumulated term by term to limit cancellation
    let f = |t: &[f64]| -> Result<f64> {
        if t.iter().any(|v| *v <= 0.0) {
            return Err(Error::Domain("finite-difference step left the parameter space".into()));
        }
        let mut d = 0.0;
        for k in 0..params.slopes.len() {
            let (b0, b1) = (params.slopes[k], t[m + k]);
            d += stats.piece_count(k) as f64 * ((b1 - b0) / b0).ln_1p();
            d -= stats.weighted_exposure(k, &t[..m]) * b1 - stats.weighted_exposure(k, &params.gammas) * b0;
        }
        for a in 0..m {
            d += stats.n() as f64 * ((t[a] - params.gammas[a]) / params.gammas[a]).ln_1p();
        }
        Ok(d)
    };
    let h: Vec<f64> = theta.iter().map(|x| rel_step * x.abs().max(1e-300)).collect();
    let mut e = DMatrix::zeros(p, p);
    let f0 = 0.0;
    for a in 0..p {
        for c in a..p {
            let v = if a == c {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[a] += h[a];
                dn[a] -= h[a];
                (f(&up)? - 2.0 * f0 + f(&dn)?) / (h[a] * h[a])
            } else {
                let mut s = 0.0;
                for (sa, sc, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut t = theta.clone();
                    t[a] += sa * h[a];
                    t[c] += sc * h[c];
                    s += w * f(&t)?;
                }
                s / (4.0 * h[a] * h[c])
            };
            e[(a, c)] = -v;
            e[(c, a)] = -v;
        }
    }
    if e.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::NonFinite("finite-difference Hessian".into()));
    }
    Ok(InfoMatrix {
        kind: InfoKind::Observed,
        entries: e,
    })
}

fn check_interior(params: &PlaParams) -> Result<()> {
    if params
        .slopes
        .iter()
        .chain(&params.gammas)
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::Domain("parameters must be strictly positive".into()));
    }
    Ok(())
}

/// Expected (Fisher) information for a sample of `n` systems drawn from `model`.
///
/// Stage `j` falls in piece `k` with probability `e^{−κ_{j,k−1}} − e^{−κ_{j,k}}`
/// and its expected exposure there is that probability over the stage rate.
pub fn expected_information(model: &PlaModel, n: usize) -> Result<InfoMatrix> {
    let (counts, expo) = expected_tables(model, n);
    let info = assemble(model.params(), n as f64, &counts, |j, k| expo[j][k], InfoKind::Expected);
    let det = info.determinant();
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::SingularInformation { determinant: det });
    }
    Ok(info)
}

/// Expected piece counts `E N_k` (summed over stages) and exposures `E T_k^{(j)}`.
pub fn expected_tables(model: &PlaModel, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let params = model.params();
    let jj = model.components();
    let nn = model.pieces();
    let nf = n as f64;
    let mut counts = vec![0.0; nn];
    let mut expo = vec![vec![0.0; nn]; jj];
    for j in 0..jj {
        let mult = model.stage_multiplier(j);
        let cum = model.knot_base_cum(j);
        for k in 0..nn {
            let enter = (-mult * cum[k]).exp();
            let leave = if k + 1 == nn { 0.0 } else { (-mult * cum[k + 1]).exp() };
            counts[k] += nf * (enter - leave);
            expo[j][k] = nf * (enter - leave) / (mult * params.slopes[k]);
        }
    }
    (counts, expo)
}

/// [`expected_information`] restricted to two components and two pieces.
pub fn expected_information_2x2(model: &PlaModel, n: usize) -> Result<InfoMatrix> {
    if model.components() != 2 || model.pieces() != 2 {
        return Err(Error::InvalidParams("expected J = 2 and N = 2".into()));
    }
    expected_information(model, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Asymptotic,
    BootNormal,
    BootPercentile,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ParamInterval {
    pub name: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    /// Bootstrap bias estimate; absent for Wald intervals.
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IntervalSet {
    pub method: IntervalMethod,
    pub level: f64,
    pub intervals: Vec<ParamInterval>,
    /// Successful bootstrap replicates, if any.
    pub replicates: Option<usize>,
}

impl IntervalSet {
    pub fn get(&self, name: &str) -> Option<&ParamInterval> {
        self.intervals.iter().find(|i| i.name == name)
    }

    /// Clips `b_k` intervals at 0 and `γ_j` intervals at 1.
    pub fn truncate_support(&mut self) {
        for iv in &mut self.intervals {
            let floor = if iv.name.starts_with("gamma") { 1.0 } else { 0.0 };
            iv.lower = iv.lower.max(floor);
            iv.upper = iv.upper.max(floor);
        }
    }
}

fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidProbability(level));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + level / 2.0))
}

/// Wald intervals `θ̂ ± z·SE`.
pub fn asymptotic_ci(fit: &FitResult, info: &InfoMatrix, level: f64) -> Result<IntervalSet> {
    let z = z_value(level)?;
    let se = info.standard_errors()?;
    let intervals = fit
        .parameter_names()
        .into_iter()
        .zip(fit.theta())
        .zip(se)
        .map(|((name, est), se)| ParamInterval {
            name,
            estimate: est,
            lower: est - z * se,
            upper: est + z * se,
            se,
            bias: None,
        })
        .collect();
    Ok(IntervalSet {
        method: IntervalMethod::Asymptotic,
        level,
        intervals,
        replicates: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    /// Simulate new systems from the fitted model.
    #[default]
    Parametric,
    /// Resample observed systems with replacement.
    Nonparametric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub scheme: Resampling,
    /// Refit settings; the grid policy normally matches the original fit.
    pub fit: FitConfig,
    /// Largest tolerated share of failed refits, in percent.
    pub max_failure_pct: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            level: 0.95,
            seed: 0,
            scheme: Resampling::Parametric,
            fit: FitConfig::default(),
            max_failure_pct: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub index: usize,
    /// `None` when the refit failed; the message is in `status`.
    pub theta: Option<Vec<f64>>,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub normal: IntervalSet,
    pub percentile: IntervalSet,
    pub replicates: Vec<Replicate>,
    pub failed: usize,
}

impl BootstrapResult {
    /// One row per replicate: index, parameters, refit status.
    pub fn write_csv<W: Write>(&self, names: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend(names.iter().cloned());
        header.push("refit_status".into());
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.replicates {
            let mut row = vec![r.index.to_string()];
            match &r.theta {
                Some(t) => row.extend(t.iter().map(|v| format!("{v:.17e}"))),
                None => row.extend(names.iter().map(|_| String::new())),
            }
            row.push(r.status.clone());
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `n` systems from `model` on the given stream.
pub fn simulate_data<R: Rng + ?Sized>(model: &PlaModel, n: usize, rng: &mut R) -> Result<LoadShareData> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| model.sample_system(rng).gaps).collect();
    LoadShareData::from_rows(&rows)
}

fn resample_rows<R: Rng + ?Sized>(data: &LoadShareData, rng: &mut R) -> Result<LoadShareData> {
    let n = data.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| data.row(rng.random_range(0..n))).collect();
    LoadShareData::from_rows(&rows)
}

/// Bootstrap bias, standard errors, normal-approximation and percentile intervals.
///
/// Replicate `r` uses stream `(seed, r)`, so results do not depend on the
/// number of worker threads.
pub fn bootstrap(data: &LoadShareData, fitted: &FitResult, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    if cfg.replicates < 100 {
        return Err(Error::InvalidParams(format!(
            "bootstrap needs at least 100 replicates, got {}",
            cfg.replicates
        )));
    }
    let z = z_value(cfg.level)?;
    let n = data.n();
    let replicates: Vec<Replicate> = (0..cfg.replicates)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream(cfg.seed, index as u64);
            let sample = match cfg.scheme {
                Resampling::Parametric => simulate_data(&fitted.model, n, &mut rng),
                Resampling::Nonparametric => resample_rows(data, &mut rng),
            };
            match sample.and_then(|d| fit(&d, &cfg.fit)) {
                Ok(f) => Replicate {
                    index,
                    theta: Some(f.theta()),
                    status: "ok".into(),
                },
                Err(e) => Replicate {
                    index,
                    theta: None,
                    status: e.to_string(),
                },
            }
        })
        .collect();
    let ok: Vec<&Vec<f64>> = replicates.iter().filter_map(|r| r.theta.as_ref()).collect();
    let failed = replicates.len() - ok.len();
    if failed as f64 > cfg.max_failure_pct / 100.0 * cfg.replicates as f64 || ok.len() < 2 {
        return Err(Error::ExcessiveRefitFailures {
            failed,
            attempted: cfg.replicates,
            limit_pct: cfg.max_failure_pct,
        });
    }
    let b = ok.len();
    let theta_hat = fitted.theta();
    let names = fitted.parameter_names();
    let alpha = 1.0 - cfg.level;
    let lo_idx = ((alpha * b as f64 / 2.0).ceil() as usize).clamp(1, b) - 1;
    let hi_idx = (((1.0 - alpha / 2.0) * b as f64).ceil() as usize).clamp(1, b) - 1;
    let mut normal = Vec::new();
    let mut pct = Vec::new();
    for (i, name) in names.into_iter().enumerate() {
        let mut col: Vec<f64> = ok.iter().map(|t| t[i]).collect();
        let mean = col.iter().sum::<f64>() / b as f64;
        let se = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64).sqrt();
        let bias = mean - theta_hat[i];
        let centre = theta_hat[i] - bias;
        normal.push(ParamInterval {
            name: name.clone(),
            estimate: theta_hat[i],
            lower: centre - z * se,
            upper: centre + z * se,
            se,
            bias: Some(bias),
        });
        col.sort_by(f64::total_cmp);
        pct.push(ParamInterval {
            name,
            estimate: theta_hat[i],
            lower: col[lo_idx],
            upper: col[hi_idx],
            se,
            bias: Some(bias),
        });
    }
    Ok(BootstrapResult {
        normal: IntervalSet {
            method: IntervalMethod::BootNormal,
            level: cfg.level,
            intervals: normal,
            replicates: Some(b),
        },
        percentile: IntervalSet {
            method: IntervalMethod::BootPercentile,
            level: cfg.level,
            intervals: pct,
            replicates: Some(b),
        },
        replicates,
        failed,
    })
}
