//! Likelihood, maximum-likelihood fitting and cut-point selection.

mod likelihood;
mod mle;
mod select;
mod stats;

pub use likelihood::{
    clamped_pieces, log_likelihood, loglik_constant, profile_gradient, profile_hessian,
    profile_loglik, slopes_given_gamma, SLOPE_FLOOR,
};
pub use mle::{
    fit_closed_form, fit_numeric, score_quadratic_roots, FitMethod, FitResult, FitWarning,
    OptimizerConfig,
};
pub use select::{grid_with_interior, knot_candidates, select_cut_points, Candidate, Selection};
pub use stats::{sufficient_stats, sufficient_stats_with, KnotBinning, StatsOptions, SufficientStats};

use crate::data::LoadShareData;
use crate::error::{Error, Result};
use crate::model::CutGrid;

/// Where the first cut point of a data-driven grid sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Smallest observed gap of the stage.
    #[default]
    Minimum,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridPolicy {
    /// Two-piece grid, interior knot chosen by likelihood over the `(p1, p2)` quantile window.
    Select { p1: f64, p2: f64 },
    /// User-supplied interior knots per stage; outer points from the data.
    Interior(Vec<Vec<f64>>),
    Fixed(CutGrid),
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self::Select { p1: 0.2, p2: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Closed form when `J = N = 2`, numeric otherwise or if the closed form fails.
    #[default]
    Auto,
    Numeric,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitConfig {
    pub grid: GridPolicy,
    pub anchor: Anchor,
    pub stats: StatsOptions,
    pub method: MethodChoice,
    pub optimizer: OptimizerConfig,
}

/// Fits on a given grid.
pub fn fit_on_grid(data: &LoadShareData, grid: &CutGrid, cfg: &FitConfig) -> Result<FitResult> {
    let stats = sufficient_stats_with(data, grid, cfg.stats)?;
    fit_stats(&stats, cfg)
}

pub fn fit_stats(stats: &SufficientStats, cfg: &FitConfig) -> Result<FitResult> {
    let two_by_two = stats.components() == 2 && stats.pieces() == 2;
    match cfg.method {
        MethodChoice::ClosedForm => fit_closed_form(stats),
        MethodChoice::Numeric => fit_numeric(stats, &cfg.optimizer),
        MethodChoice::Auto if two_by_two => {
            fit_closed_form(stats).or_else(|_| fit_numeric(stats, &cfg.optimizer))
        }
        MethodChoice::Auto => fit_numeric(stats, &cfg.optimizer),
    }
}

/// Fit under the configured grid policy; also returns the selection trace when
/// the grid was chosen from the data.
pub fn fit_with_selection(
    data: &LoadShareData,
    cfg: &FitConfig,
) -> Result<(FitResult, Option<Selection>)> {
    if data.components() < 1 {
        return Err(Error::InvalidData("no stages".into()));
    }
    match &cfg.grid {
        GridPolicy::Select { p1, p2 } => {
            let (sel, fit) = select_cut_points(data, *p1, *p2, cfg)?;
            Ok((fit, Some(sel)))
        }
        GridPolicy::Interior(knots) => {
            let grid = grid_with_interior(data, knots, cfg.anchor)?;
            Ok((fit_on_grid(data, &grid, cfg)?, None))
        }
        GridPolicy::Fixed(grid) => Ok((fit_on_grid(data, grid, cfg)?, None)),
    }
}

pub fn fit(data: &LoadShareData, cfg: &FitConfig) -> Result<FitResult> {
    fit_with_selection(data, cfg).map(|(f, _)| f)
}
