//! Kolmogorov–Smirnov-type goodness of fit and AIC.

use crate::data::{sorted, LoadShareData};
use crate::error::{Error, Result};
use crate::estimation::{fit, loglik_constant, FitConfig, FitResult};
use crate::model::{CutGrid, PlaModel};
use crate::rng::stream;
use crate::uncertainty::simulate_data;
use rayon::prelude::*;

/// Where the fitted stage CDF starts accumulating hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfAnchor {
    /// At the first cut point `τ_0`; the CDF is 0 below it.
    #[default]
    GridStart,
    /// At time 0, extending the first segment back to the origin.
    Origin,
}

fn anchored(model: &PlaModel, anchor: CdfAnchor) -> Result<PlaModel> {
    match anchor {
        CdfAnchor::GridStart => Ok(model.clone()),
        CdfAnchor::Origin => {
            let rows = model
                .grid()
                .as_rows()
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r[0] = 0.0;
                    r
                })
                .collect();
            PlaModel::new(CutGrid::new(rows)?, model.params().clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KsStatistic {
    pub total: f64,
    pub per_stage: Vec<f64>,
}

/// `T_n = Σ_j max_i |Ĝ^{(j)}(y_{(i)}^{(j)}) − i/n|`.
pub fn ks_statistic(data: &LoadShareData, model: &PlaModel, anchor: CdfAnchor) -> Result<KsStatistic> {
    if data.components() != model.components() {
        return Err(Error::InvalidData(format!(
            "data has {} stages, model has {}",
            data.components(),
            model.components()
        )));
    }
    let m = anchored(model, anchor)?;
    let n = data.n() as f64;
    let per_stage = (0..data.components())
        .map(|j| {
            sorted(data.stage(j))
                .iter()
                .enumerate()
                .map(|(i, &y)| Ok((m.stage_cdf(j, y)? - (i + 1) as f64 / n).abs()))
                .try_fold(0.0f64, |acc, d: Result<f64>| Ok(acc.max(d?)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(KsStatistic {
        total: per_stage.iter().sum(),
        per_stage,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Refit each simulated dataset; otherwise reuse the fitted model.
    pub refit: bool,
    pub fit: FitConfig,
    pub anchor: CdfAnchor,
    pub max_failure_pct: f64,
}

impl Default for GofConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0,
            refit: true,
            fit: FitConfig::default(),
            anchor: CdfAnchor::GridStart,
            max_failure_pct: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GofReport {
    pub statistic: f64,
    pub per_stage: Vec<f64>,
    pub p_value: f64,
    #[serde(rename = "R")]
    pub replicates: usize,
    pub failed: usize,
    pub seed: u64,
    pub refit: bool,
    pub anchor: CdfAnchor,
}

impl GofReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Parametric-bootstrap p-value `(1 + #{T_n* ≥ T_n}) / (R + 1)`.
pub fn ks_pvalue_mc(data: &LoadShareData, fitted: &FitResult, cfg: &GofConfig) -> Result<GofReport> {
    if cfg.replicates < 200 {
        return Err(Error::InvalidParams(format!(
            "Monte Carlo p-value needs at least 200 replicates, got {}",
            cfg.replicates
        )));
    }
    let observed = ks_statistic(data, &fitted.model, cfg.anchor)?;
    let n = data.n();
    let stats: Vec<Option<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(cfg.seed, r as u64);
            let sim = simulate_data(&fitted.model, n, &mut rng).ok()?;
            let model = if cfg.refit {
                fit(&sim, &cfg.fit).ok()?.model
            } else {
                fitted.model.clone()
            };
            ks_statistic(&sim, &model, cfg.anchor).ok().map(|k| k.total)
        })
        .collect();
    let ok: Vec<f64> = stats.into_iter().flatten().collect();
    let failed = cfg.replicates - ok.len();
    if failed as f64 > cfg.max_failure_pct / 100.0 * cfg.replicates as f64 {
        return Err(Error::ExcessiveRefitFailures {
            failed,
            attempted: cfg.replicates,
            limit_pct: cfg.max_failure_pct,
        });
    }
    let exceed = ok.iter().filter(|t| **t >= observed.total).count();
    Ok(GofReport {
        statistic: observed.total,
        per_stage: observed.per_stage,
        p_value: (1 + exceed) as f64 / (ok.len() + 1) as f64,
        replicates: ok.len(),
        failed,
        seed: cfg.seed,
        refit: cfg.refit,
        anchor: cfg.anchor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AicOptions {
    /// Use the log-likelihood with the `n Σ ln(J − j)` constant.
    pub include_constant: bool,
    /// Count interior cut points as parameters.
    pub count_knots: bool,
}

impl Default for AicOptions {
    fn default() -> Self {
        Self {
            include_constant: true,
            count_knots: false,
        }
    }
}

/// `2k − 2ℓ` with `k = N + J − 1`.
pub fn aic(fit: &FitResult) -> f64 {
    aic_with(fit, AicOptions::default())
}

pub fn aic_with(fit: &FitResult, opts: AicOptions) -> f64 {
    let (jj, nn) = (fit.model.components(), fit.model.pieces());
    let mut k = nn + jj - 1;
    if opts.count_knots {
        k += jj * (nn - 1);
    }
    let ll = if opts.include_constant {
        fit.loglik_full
    } else {
        fit.loglik_full - loglik_constant(fit.stats.n(), jj)
    };
    2.0 * k as f64 - 2.0 * ll
}
