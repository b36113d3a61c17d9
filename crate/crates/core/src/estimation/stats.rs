use crate::data::LoadShareData;
use crate::error::{Error, Result};
use crate::model::CutGrid;

/// Which piece an observation lying exactly on an interior cut point joins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnotBinning {
    /// `[τ_0, τ_1], (τ_1, τ_2], …`: a tie with `τ_k` is counted in piece `k`.
    #[default]
    Lower,
    /// `[τ_0, τ_1), [τ_1, τ_2), …, [τ_{N-1}, τ_N]`: a tie with `τ_k` is counted in piece `k+1`.
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatsOptions {
    pub binning: KnotBinning,
    /// Allow observations above `τ_N` (they land in the extended last piece).
    pub extend_last: bool,
}

/// Counts `n_k^{(j)}` and exposures `T_k^{(j)}` on a cut grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    counts: Vec<Vec<u64>>,
    exposures: Vec<Vec<f64>>,
    grid: CutGrid,
    n: usize,
}

impl SufficientStats {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> usize {
        self.counts.len()
    }

    pub fn pieces(&self) -> usize {
        self.grid.pieces()
    }

    pub fn grid(&self) -> &CutGrid {
        &self.grid
    }

    /// `n_k^{(j)}` for 0-based piece `k`.
    pub fn count(&self, j: usize, k: usize) -> u64 {
        self.counts[j][k]
    }

    /// `T_k^{(j)}` for 0-based piece `k`.
    pub fn exposure(&self, j: usize, k: usize) -> f64 {
        self.exposures[j][k]
    }

    /// `N_k = Σ_j n_k^{(j)}`.
    pub fn piece_count(&self, k: usize) -> u64 {
        self.counts.iter().map(|c| c[k]).sum()
    }

    /// `D_k(γ) = Σ_j (J − j) γ_j T_k^{(j)}`, with `gammas = (γ_1, …)`.
    pub fn weighted_exposure(&self, k: usize, gammas: &[f64]) -> f64 {
        let jj = self.components();
        (0..jj)
            .map(|j| {
                let g = if j == 0 { 1.0 } else { gammas[j - 1] };
                (jj - j) as f64 * g * self.exposures[j][k]
            })
            .sum()
    }

    /// Builds statistics from explicit tables (rows indexed by stage).
    pub fn from_parts(
        counts: Vec<Vec<u64>>,
        exposures: Vec<Vec<f64>>,
        grid: CutGrid,
        n: usize,
    ) -> Result<Self> {
        let (jj, nn) = (grid.stages(), grid.pieces());
        let shape_ok = counts.len() == jj
            && exposures.len() == jj
            && counts.iter().all(|c| c.len() == nn)
            && exposures.iter().all(|t| t.len() == nn);
        if !shape_ok {
            return Err(Error::InvalidData("statistics tables do not match the grid".into()));
        }
        if exposures.iter().flatten().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidData("exposures must be finite and nonnegative".into()));
        }
        Ok(Self {
            counts,
            exposures,
            grid,
            n,
        })
    }
}

pub fn sufficient_stats(data: &LoadShareData, grid: &CutGrid) -> Result<SufficientStats> {
    sufficient_stats_with(data, grid, StatsOptions::default())
}

pub fn sufficient_stats_with(
    data: &LoadShareData,
    grid: &CutGrid,
    opts: StatsOptions,
) -> Result<SufficientStats> {
    if grid.stages() != data.components() {
        return Err(Error::InvalidGrid(format!(
            "grid has {} stages, data has {}",
            grid.stages(),
            data.components()
        )));
    }
    let nn = grid.pieces();
    let mut counts = vec![vec![0u64; nn]; data.components()];
    let mut exposures = vec![vec![0.0; nn]; data.components()];
    for j in 0..data.components() {
        let taus = grid.stage(j);
        let interior = &taus[1..nn];
        let (min, max) = (data.min(j), data.max(j));
        if min < taus[0] || (!opts.extend_last && max > taus[nn]) {
            return Err(Error::GridDoesNotCover {
                stage: j,
                min,
                max,
                tau0: taus[0],
                tau_n: taus[nn],
            });
        }
        for &y in data.stage(j) {
            let k = match opts.binning {
                KnotBinning::Lower => interior.partition_point(|&t| t < y),
                KnotBinning::Upper => interior.partition_point(|&t| t <= y),
            };
            counts[j][k] += 1;
            exposures[j][k] += y - taus[k];
            for l in 0..k {
                exposures[j][l] += taus[l + 1] - taus[l];
            }
        }
    }
    Ok(SufficientStats {
        counts,
        exposures,
        grid: grid.clone(),
        n: data.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_stage(ys: Vec<f64>, taus: Vec<f64>, binning: KnotBinning) -> SufficientStats {
        let d = LoadShareData::unchecked(vec![ys]).unwrap();
        let g = CutGrid::new(vec![taus]).unwrap();
        sufficient_stats_with(
            &d,
            &g,
            StatsOptions {
                binning,
                extend_last: false,
            },
        )
        .unwrap()
    }

    #[test]
    fn half_open_binning_puts_max_in_last_piece() {
        let s = one_stage(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], KnotBinning::Upper);
        assert_eq!((s.count(0, 0), s.count(0, 1)), (1, 2));
        assert_eq!(s.exposure(0, 0), 2.0);
        assert_eq!(s.exposure(0, 1), 1.0);
    }

    #[test]
    fn lower_binning_moves_knot_ties_down() {
        let s = one_stage(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], KnotBinning::Lower);
        assert_eq!((s.count(0, 0), s.count(0, 1)), (2, 1));
        // exposure totals do not depend on the tie rule
        assert_eq!(s.exposure(0, 0), 2.0);
        assert_eq!(s.exposure(0, 1), 1.0);
    }

    #[test]
    fn empty_upper_piece() {
        let s = one_stage(vec![1.0, 1.5, 1.2], vec![0.5, 2.0, 3.0], KnotBinning::Lower);
        assert_eq!(s.count(0, 0), 3);
        assert_eq!(s.exposure(0, 1), 0.0);
    }

    #[test]
    fn coverage_is_checked() {
        let d = LoadShareData::unchecked(vec![vec![1.0, 5.0]]).unwrap();
        let g = CutGrid::new(vec![vec![2.0, 3.0, 4.0]]).unwrap();
        assert!(matches!(
            sufficient_stats(&d, &g),
            Err(Error::GridDoesNotCover { .. })
        ));
        let g = CutGrid::new(vec![vec![0.0, 3.0, 4.0]]).unwrap();
        assert!(sufficient_stats(&d, &g).is_err());
        let s = sufficient_stats_with(
            &d,
            &g,
            StatsOptions {
                extend_last: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(s.count(0, 1), 1);
        assert_eq!(s.exposure(0, 1), 2.0);
    }
}
