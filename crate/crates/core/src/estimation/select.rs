use super::{fit_on_grid, Anchor, FitConfig};
use crate::data::{quantile_type7, sorted, LoadShareData};
use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::model::CutGrid;

/// One interior-knot candidate visited by the selection sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Candidate {
    /// Interior knot per stage.
    pub knots: Vec<f64>,
    /// Maximized full log-likelihood, `None` if the grid was invalid or the fit failed.
    pub loglik: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub grid: CutGrid,
    pub trace: Vec<Candidate>,
    /// Index into `trace` of the chosen candidate.
    pub chosen: usize,
}

/// Interior-knot candidates per stage: the `p1` sample quantile, then
/// successively the next larger observation, `l` in total, where `l` is the
/// smallest per-stage count of observations between the `p1` and `p2`
/// quantiles.
pub fn knot_candidates(data: &LoadShareData, p1: f64, p2: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0 < p1 && p1 < p2 && p2 < 1.0) {
        return Err(Error::InvalidParams(format!(
            "quantile window needs 0 < p1 < p2 < 1, got ({p1}, {p2})"
        )));
    }
    let cols: Vec<Vec<f64>> = data.columns().iter().map(|c| sorted(c)).collect();
    let windows: Vec<(f64, f64)> = cols
        .iter()
        .map(|s| (quantile_type7(s, p1), quantile_type7(s, p2)))
        .collect();
    let l = cols
        .iter()
        .zip(&windows)
        .map(|(s, (lo, hi))| s.iter().filter(|y| *y >= lo && *y <= hi).count())
        .min()
        .unwrap_or(0);
    let mut current: Vec<f64> = windows.iter().map(|w| w.0).collect();
    let mut out = Vec::with_capacity(l);
    for step in 0..l {
        if step > 0 {
            let next: Option<Vec<f64>> = cols
                .iter()
                .zip(&current)
                .map(|(s, a)| s.iter().copied().find(|y| y > a))
                .collect();
            match next {
                Some(v) => current = v,
                None => break,
            }
        }
        out.push(current.clone());
    }
    if out.is_empty() {
        return Err(Error::NoCandidates(format!(
            "no observations between the {p1} and {p2} sample quantiles"
        )));
    }
    Ok(out)
}

/// Grid with the given interior knots and data-driven outer cut points.
pub fn grid_with_interior(data: &LoadShareData, interior: &[Vec<f64>], anchor: Anchor) -> Result<CutGrid> {
    if interior.len() != data.components() {
        return Err(Error::InvalidGrid(format!(
            "{} interior-knot rows for {} stages",
            interior.len(),
            data.components()
        )));
    }
    let rows = interior
        .iter()
        .enumerate()
        .map(|(j, knots)| {
            let lo = match anchor {
                Anchor::Minimum => data.min(j),
                Anchor::Zero => 0.0,
            };
            let mut row = Vec::with_capacity(knots.len() + 2);
            row.push(lo);
            row.extend_from_slice(knots);
            row.push(data.max(j));
            row
        })
        .collect();
    CutGrid::new(rows)
}

/// Sweeps the interior knot (two-piece grids) and keeps the candidate with
/// the largest maximized log-likelihood; ties go to the earlier candidate.
pub fn select_cut_points(
    data: &LoadShareData,
    p1: f64,
    p2: f64,
    cfg: &FitConfig,
) -> Result<(Selection, FitResult)> {
    let candidates = knot_candidates(data, p1, p2)?;
    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, FitResult)> = None;
    for (idx, knots) in candidates.into_iter().enumerate() {
        let rows: Vec<Vec<f64>> = knots.iter().map(|k| vec![*k]).collect();
        let fit = grid_with_interior(data, &rows, cfg.anchor)
            .and_then(|g| fit_on_grid(data, &g, cfg));
        let loglik = fit.as_ref().ok().map(|f| f.loglik_full);
        if let Ok(f) = fit {
            if best.as_ref().is_none_or(|(_, b)| f.loglik_full > b.loglik_full) {
                best = Some((idx, f));
            }
        }
        trace.push(Candidate { knots, loglik });
    }
    let (chosen, fit) = best.ok_or_else(|| {
        Error::NoCandidates("no candidate knot produced a valid fit".into())
    })?;
    Ok((
        Selection {
            grid: fit.model.grid().clone(),
            trace,
            chosen,
        },
        fit,
    ))
}
