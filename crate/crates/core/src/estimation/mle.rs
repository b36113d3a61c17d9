use super::likelihood::{
    clamped_pieces, log_likelihood, profile_gradient, profile_hessian, profile_loglik,
    slopes_given_gamma,
};
use super::stats::SufficientStats;
use crate::error::{Error, Result};
use crate::model::{OrderingWarning, PlaModel, PlaParams};
use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Numeric,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// Piece with exposure but no failures; its slope was set to the floor.
    ClampedSlope { piece: usize },
    Ordering(OrderingWarning),
}

impl std::fmt::Display for FitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ClampedSlope { piece } => write!(
                f,
                "piece {} has no failures; slope clamped to {:e}",
                piece + 1,
                super::likelihood::SLOPE_FLOOR
            ),
            Self::Ordering(w) => w.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Simplex spread tolerance on the objective.
    pub tol: f64,
    /// Iteration cap per free multiplier.
    pub iters_per_dim: u64,
    /// Newton refinement on log γ after the simplex search.
    pub polish: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            iters_per_dim: 500,
            polish: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: PlaModel,
    pub stats: SufficientStats,
    /// Log-likelihood including the `n Σ_j ln(J − j)` constant.
    pub loglik_full: f64,
    pub loglik_profile_max: f64,
    pub method: FitMethod,
    pub converged: bool,
    pub iterations: u64,
    /// Max-norm of the profile score in γ at the estimate.
    pub score_norm: f64,
    pub warnings: Vec<FitWarning>,
}

impl FitResult {
    /// Parameter vector `(γ_1, …, γ_{J−1}, b_1, …, b_N)`.
    pub fn theta(&self) -> Vec<f64> {
        let p = self.model.params();
        p.gammas.iter().chain(p.slopes.iter()).copied().collect()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let p = self.model.params();
        (1..=p.gammas.len())
            .map(|j| format!("gamma{j}"))
            .chain((1..=p.slopes.len()).map(|k| format!("b{k}")))
            .collect()
    }
}

fn finish(
    stats: &SufficientStats,
    gammas: Vec<f64>,
    method: FitMethod,
    converged: bool,
    iterations: u64,
) -> Result<FitResult> {
    let slopes = slopes_given_gamma(stats, &gammas)?;
    let params = PlaParams::new(slopes, gammas)?;
    let loglik_full = log_likelihood(stats, &params, true)?;
    let loglik_profile_max = profile_loglik(stats, &params.gammas)?;
    if !loglik_full.is_finite() {
        return Err(Error::NonFinite("log-likelihood at the estimate".into()));
    }
    let score_norm = profile_gradient(stats, &params.gammas)
        .iter()
        .fold(0.0f64, |m, g| m.max(g.abs()));
    let mut warnings: Vec<FitWarning> = clamped_pieces(stats)
        .into_iter()
        .map(|piece| FitWarning::ClampedSlope { piece })
        .collect();
    warnings.extend(params.ordering_warnings().into_iter().map(FitWarning::Ordering));
    let model = PlaModel::new(stats.grid().clone(), params)?;
    Ok(FitResult {
        model,
        stats: stats.clone(),
        loglik_full,
        loglik_profile_max,
        method,
        converged,
        iterations,
        score_norm,
        warnings,
    })
}

struct NegProfile<'a> {
    stats: &'a SufficientStats,
}

impl CostFunction for NegProfile<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let gammas: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        Ok(match profile_loglik(self.stats, &gammas) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        })
    }
}

/// Stage means recovered from the exposures: `τ_0 + Σ_k T_k / n`.
fn stage_means(stats: &SufficientStats) -> Vec<f64> {
    (0..stats.components())
        .map(|j| {
            let total: f64 = (0..stats.pieces()).map(|k| stats.exposure(j, k)).sum();
            stats.grid().stage(j)[0] + total / stats.n() as f64
        })
        .collect()
}

fn starts(stats: &SufficientStats) -> Vec<Vec<f64>> {
    let jj = stats.components();
    let ladder: Vec<f64> = (1..jj).map(|j| j as f64 + 0.5).collect();
    let means = stage_means(stats);
    let moment: Vec<f64> = (1..jj)
        .map(|j| (means[0] / means[j]) * jj as f64 / (jj - j) as f64)
        .collect();
    let mut out = vec![ladder];
    if moment.iter().all(|g| g.is_finite() && *g > 0.0) {
        out.push(moment);
    }
    out
}

fn simplex_search(
    stats: &SufficientStats,
    u0: &[f64],
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, u64, bool)> {
    let dim = u0.len();
    let mut simplex = vec![u0.to_vec()];
    for i in 0..dim {
        let mut v = u0.to_vec();
        v[i] += 0.5;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(cfg.tol)
        .map_err(|e| Error::NonFinite(e.to_string()))?;
    let cap = cfg.iters_per_dim * dim as u64;
    let res = Executor::new(NegProfile { stats }, solver)
        .configure(|s| s.max_iters(cap))
        .run()
        .map_err(|e| Error::NonFinite(e.to_string()))?;
    let state = res.state();
    let best = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::NonFinite("simplex search produced no point".into()))?;
    let hit_cap = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::MaxItersReached)
    );
    Ok((best, state.get_iter(), !hit_cap))
}

// Newton iterations on u = ln γ; the profile is concave in u.
fn newton_polish(stats: &SufficientStats, u: &mut Vec<f64>) -> (u64, bool) {
    let dim = u.len();
    let f = |u: &[f64]| {
        let g: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        profile_loglik(stats, &g).unwrap_or(f64::NEG_INFINITY)
    };
    let mut value = f(u);
    for it in 0..60 {
        let gam: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let gg = profile_gradient(stats, &gam);
        let hg = profile_hessian(stats, &gam);
        let grad = DVector::from_fn(dim, |i, _| gam[i] * gg[i]);
        if grad.amax() <= 1e-11 * (1.0 + value.abs()) {
            return (it, true);
        }
        let hess = DMatrix::from_fn(dim, dim, |a, c| {
            gam[a] * gam[c] * hg[a][c] + if a == c { gam[a] * gg[a] } else { 0.0 }
        });
        let step = match (-hess).cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let v = f(&trial);
            if v >= value {
                *u = trial;
                value = v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            let gam: Vec<f64> = u.iter().map(|x| x.exp()).collect();
            let g = profile_gradient(stats, &gam);
            let gmax = g.iter().zip(&gam).fold(0.0f64, |m, (a, b)| m.max((a * b).abs()));
            return (it, gmax <= 1e-7 * (1.0 + value.abs()));
        }
    }
    (60, false)
}

/// Maximizes the profile log-likelihood over `γ` on a fixed grid.
pub fn fit_numeric(stats: &SufficientStats, cfg: &OptimizerConfig) -> Result<FitResult> {
    let jj = stats.components();
    if jj == 1 {
        return finish(stats, vec![], FitMethod::Numeric, true, 0);
    }
    let mut best: Option<(f64, Vec<f64>, u64, bool)> = None;
    for start in starts(stats) {
        let u0: Vec<f64> = start.iter().map(|g| g.ln()).collect();
        let (mut u, mut iters, mut converged) = simplex_search(stats, &u0, cfg)?;
        if cfg.polish {
            let (extra, ok) = newton_polish(stats, &mut u);
            iters += extra;
            converged = converged || ok;
        }
        let gammas: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let value = profile_loglik(stats, &gammas)?;
        if !value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, gammas, iters, converged));
        }
    }
    let (_, gammas, iters, converged) =
        best.ok_or_else(|| Error::NonFinite("profile log-likelihood is not finite".into()))?;
    finish(stats, gammas, FitMethod::Numeric, converged, iters)
}

/// Positive roots of the score quadratic for `J = 2`, `N = 2`.
pub fn score_quadratic_roots(stats: &SufficientStats) -> Result<Vec<f64>> {
    if stats.components() != 2 || stats.pieces() != 2 {
        return Err(Error::InvalidParams(
            "closed-form estimates need J = 2 and N = 2".into(),
        ));
    }
    let n = stats.n() as f64;
    let (t10, t20) = (stats.exposure(0, 0), stats.exposure(0, 1));
    let (t11, t21) = (stats.exposure(1, 0), stats.exposure(1, 1));
    let (n1, n2) = (stats.piece_count(0) as f64, stats.piece_count(1) as f64);
    let a = (n1 + n2 - n) * t11 * t21;
    let b = 2.0 * ((n1 - n) * t20 * t11 + (n2 - n) * t10 * t21);
    let c = -4.0 * n * t10 * t20;
    let roots = if a == 0.0 {
        if b == 0.0 {
            return Err(Error::Degenerate("score equation is identically zero".into()));
        }
        vec![-c / b]
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(Error::NoAdmissibleRoot(format!("discriminant {disc} < 0")));
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            vec![0.0]
        } else {
            vec![q / a, c / q]
        }
    };
    let pos: Vec<f64> = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r > 0.0)
        .collect();
    if pos.is_empty() {
        return Err(Error::NoAdmissibleRoot("no positive root".into()));
    }
    Ok(pos)
}

/// Explicit estimates for two components and two pieces.
pub fn fit_closed_form(stats: &SufficientStats) -> Result<FitResult> {
    let mut best: Option<(f64, f64)> = None;
    for g in score_quadratic_roots(stats)? {
        let Ok(slopes) = slopes_given_gamma(stats, &[g]) else {
            continue;
        };
        let params = PlaParams {
            slopes,
            gammas: vec![g],
        };
        if let Ok(ll) = log_likelihood(stats, &params, false) {
            if best.is_none_or(|b| ll > b.0) {
                best = Some((ll, g));
            }
        }
    }
    let (_, g) = best.ok_or_else(|| Error::NoAdmissibleRoot("no root gives finite slopes".into()))?;
    let res = finish(stats, vec![g], FitMethod::ClosedForm, true, 0)?;
    let tol = 1e-8 * (stats.n() as f64 / g);
    if res.score_norm > tol {
        return Err(Error::NonFinite(format!(
            "closed-form root leaves score residual {:e}",
            res.score_norm
        )));
    }
    Ok(res)
}
