use super::stats::SufficientStats;
use crate::error::{Error, Result};
use crate::model::PlaParams;

/// Floor for a slope whose piece has exposure but no failures.
pub const SLOPE_FLOOR: f64 = 1e-12;

fn check_gammas(stats: &SufficientStats, gammas: &[f64]) -> Result<()> {
    if gammas.len() + 1 != stats.components() {
        return Err(Error::InvalidParams(format!(
            "{} load-share multipliers for {} stages",
            gammas.len(),
            stats.components()
        )));
    }
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::Domain(format!("load-share multiplier {g} is not positive")));
    }
    Ok(())
}

/// `n Σ_j ln(J − j)`, the constant dropped from the working log-likelihood.
pub fn loglik_constant(n: usize, components: usize) -> f64 {
    n as f64 * (1..=components).map(|m| (m as f64).ln()).sum::<f64>()
}

/// Log-likelihood through the sufficient statistics; `full` adds the
/// `n Σ_j ln(J − j)` constant.
pub fn log_likelihood(stats: &SufficientStats, params: &PlaParams, full: bool) -> Result<f64> {
    check_gammas(stats, &params.gammas)?;
    if params.slopes.len() != stats.pieces() {
        return Err(Error::InvalidParams(format!(
            "{} slopes for {} pieces",
            params.slopes.len(),
            stats.pieces()
        )));
    }
    if let Some(b) = params.slopes.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::Domain(format!("slope {b} is not positive")));
    }
    let mut ll = 0.0;
    for (k, &b) in params.slopes.iter().enumerate() {
        let nk = stats.piece_count(k) as f64;
        ll += nk * b.ln() - stats.weighted_exposure(k, &params.gammas) * b;
    }
    ll += stats.n() as f64 * params.gammas.iter().map(|g| g.ln()).sum::<f64>();
    if full {
        ll += loglik_constant(stats.n(), stats.components());
    }
    Ok(ll)
}

/// Slopes maximizing the likelihood for fixed `γ`:
/// `b_k = N_k / Σ_j (J − j) γ_j T_k^{(j)}`.
///
/// A piece with exposure but no failures gets [`SLOPE_FLOOR`]; see
/// [`clamped_pieces`].
pub fn slopes_given_gamma(stats: &SufficientStats, gammas: &[f64]) -> Result<Vec<f64>> {
    check_gammas(stats, gammas)?;
    (0..stats.pieces())
        .map(|k| {
            let nk = stats.piece_count(k) as f64;
            let dk = stats.weighted_exposure(k, gammas);
            if dk <= 0.0 {
                Err(Error::Degenerate(format!(
                    "piece {} has no exposure at any stage; its slope is not identified",
                    k + 1
                )))
            } else if nk == 0.0 {
                Ok(SLOPE_FLOOR)
            } else {
                Ok(nk / dk)
            }
        })
        .collect()
}

/// 0-based pieces with no failures whose slope was clamped.
pub fn clamped_pieces(stats: &SufficientStats) -> Vec<usize> {
    (0..stats.pieces())
        .filter(|&k| stats.piece_count(k) == 0)
        .collect()
}

/// Profile log-likelihood `Σ_k N_k (ln N_k − ln D_k(γ)) + n Σ_j ln γ_j`.
pub fn profile_loglik(stats: &SufficientStats, gammas: &[f64]) -> Result<f64> {
    check_gammas(stats, gammas)?;
    let mut ll = stats.n() as f64 * gammas.iter().map(|g| g.ln()).sum::<f64>();
    for k in 0..stats.pieces() {
        let nk = stats.piece_count(k) as f64;
        if nk > 0.0 {
            let dk = stats.weighted_exposure(k, gammas);
            if dk <= 0.0 {
                return Err(Error::Degenerate(format!("piece {} has zero exposure", k + 1)));
            }
            ll += nk * (nk.ln() - dk.ln());
        }
    }
    Ok(ll)
}

/// Gradient of [`profile_loglik`] with respect to `(γ_1, …, γ_{J−1})`.
pub fn profile_gradient(stats: &SufficientStats, gammas: &[f64]) -> Vec<f64> {
    let jj = stats.components();
    let n = stats.n() as f64;
    (1..jj)
        .map(|j| {
            let mut g = n / gammas[j - 1];
            for k in 0..stats.pieces() {
                let nk = stats.piece_count(k) as f64;
                if nk > 0.0 {
                    g -= nk * (jj - j) as f64 * stats.exposure(j, k)
                        / stats.weighted_exposure(k, gammas);
                }
            }
            g
        })
        .collect()
}

/// Hessian of [`profile_loglik`] with respect to `γ`, row-major.
pub fn profile_hessian(stats: &SufficientStats, gammas: &[f64]) -> Vec<Vec<f64>> {
    let jj = stats.components();
    let m = jj - 1;
    let n = stats.n() as f64;
    let mut h = vec![vec![0.0; m]; m];
    for k in 0..stats.pieces() {
        let nk = stats.piece_count(k) as f64;
        if nk == 0.0 {
            continue;
        }
        let d = stats.weighted_exposure(k, gammas);
        for a in 1..jj {
            for c in 1..jj {
                h[a - 1][c - 1] += nk
                    * (jj - a) as f64
                    * (jj - c) as f64
                    * stats.exposure(a, k)
                    * stats.exposure(c, k)
                    / (d * d);
            }
        }
    }
    for (a, row) in h.iter_mut().enumerate() {
        row[a] -= n / (gammas[a] * gammas[a]);
    }
    h
}
