//! The piecewise-linear cumulative-hazard (PLA) load-sharing model.
//!
//! Stage `j` (the spell between the j-th and (j+1)-st component failures) has
//! `J - j` surviving components, each with the piecewise-constant hazard
//! `γ_j·b_k` on the k-th segment of the stage's cut grid. The last segment is
//! extended to infinity. `γ_0 = 1` is implicit.

use crate::error::{Error, Result};
use rand::distr::Open01;
use rand::Rng;
use serde::Deserialize;
use std::fmt::Write as _;

/// Per-stage ordered cut points `τ_0 < τ_1 < … < τ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutGrid {
    stages: Vec<Vec<f64>>,
}

impl CutGrid {
    pub fn new(stages: Vec<Vec<f64>>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidGrid("no stages".into()));
        }
        let width = stages[0].len();
        if width < 2 {
            return Err(Error::InvalidGrid(
                "each stage needs at least two cut points (N >= 1)".into(),
            ));
        }
        for (j, taus) in stages.iter().enumerate() {
            if taus.len() != width {
                return Err(Error::InvalidGrid(format!(
                    "stage {j} has {} cut points, stage 0 has {width}",
                    taus.len()
                )));
            }
            if taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "stage {j} cut points must be finite and nonnegative"
                )));
            }
            if taus.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "stage {j} cut points must be strictly increasing: {taus:?}"
                )));
            }
        }
        Ok(Self { stages })
    }

    /// Number of stages `J`.
    pub fn stages(&self) -> usize {
        self.stages.len()
    }

    /// Number of linear pieces `N`.
    pub fn pieces(&self) -> usize {
        self.stages[0].len() - 1
    }

    pub fn stage(&self, j: usize) -> &[f64] {
        &self.stages[j]
    }

    pub fn as_rows(&self) -> &[Vec<f64>] {
        &self.stages
    }

    /// Same grid with every cut point multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.stages
                .iter()
                .map(|s| s.iter().map(|t| t * c).collect())
                .collect(),
        )
    }
}

/// Slopes `b_1..b_N` and load-share multipliers `γ_1..γ_{J-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaParams {
    pub slopes: Vec<f64>,
    pub gammas: Vec<f64>,
}

/// Soft constraint violations; the estimators do not impose these orderings.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderingWarning {
    SlopesNotIncreasing { index: usize },
    GammaNotAboveOne { index: usize, value: f64 },
    GammasNotIncreasing { index: usize },
}

impl std::fmt::Display for OrderingWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::SlopesNotIncreasing { index } => {
                write!(f, "slope b_{} does not exceed b_{}", index + 1, index)
            }
            Self::GammaNotAboveOne { index, value } => {
                write!(f, "gamma_{index} = {value} is not above 1")
            }
            Self::GammasNotIncreasing { index } => {
                write!(f, "gamma_{} does not exceed gamma_{}", index, index - 1)
            }
        }
    }
}

impl PlaParams {
    pub fn new(slopes: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if slopes.is_empty() {
            return Err(Error::InvalidParams("no slopes".into()));
        }
        if let Some(b) = slopes.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "slopes must be positive and finite, got {b}"
            )));
        }
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "load-share multipliers must be positive and finite, got {g}"
            )));
        }
        Ok(Self { slopes, gammas })
    }

    /// `γ_j`, with `γ_0 = 1`.
    #[inline]
    pub fn gamma(&self, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.gammas[j - 1]
        }
    }

    pub fn ordering_warnings(&self) -> Vec<OrderingWarning> {
        let mut out = Vec::new();
        for k in 1..self.slopes.len() {
            if self.slopes[k] <= self.slopes[k - 1] {
                out.push(OrderingWarning::SlopesNotIncreasing { index: k });
            }
        }
        for (i, &g) in self.gammas.iter().enumerate() {
            let index = i + 1;
            if g <= 1.0 && i == 0 {
                out.push(OrderingWarning::GammaNotAboveOne { index, value: g });
            }
            if i > 0 && g <= self.gammas[i - 1] {
                out.push(OrderingWarning::GammasNotIncreasing { index });
            }
        }
        out
    }
}

/// A fully specified PLA model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaModel {
    grid: CutGrid,
    params: PlaParams,
    // cumulative base hazard Σ_{ℓ≤k} b_ℓ(τ_ℓ − τ_{ℓ−1}) at each cut point, per stage
    knots_cum: Vec<Vec<f64>>,
}

impl PlaModel {
    /// Builds a model; ordering violations are allowed (see [`PlaModel::ordering_warnings`]).
    pub fn new(grid: CutGrid, params: PlaParams) -> Result<Self> {
        if params.slopes.len() != grid.pieces() {
            return Err(Error::InvalidParams(format!(
                "{} slopes for a grid with {} pieces",
                params.slopes.len(),
                grid.pieces()
            )));
        }
        if params.gammas.len() + 1 != grid.stages() {
            return Err(Error::InvalidParams(format!(
                "{} load-share multipliers for {} stages (expected {})",
                params.gammas.len(),
                grid.stages(),
                grid.stages() - 1
            )));
        }
        let knots_cum = grid
            .as_rows()
            .iter()
            .map(|taus| {
                let mut acc = 0.0;
                let mut cum = Vec::with_capacity(taus.len());
                cum.push(0.0);
                for k in 1..taus.len() {
                    acc += params.slopes[k - 1] * (taus[k] - taus[k - 1]);
                    cum.push(acc);
                }
                cum
            })
            .collect();
        Ok(Self {
            grid,
            params,
            knots_cum,
        })
    }

    /// Like [`PlaModel::new`] but rejects ordering violations.
    pub fn new_strict(grid: CutGrid, params: PlaParams) -> Result<Self> {
        let warnings = params.ordering_warnings();
        if let Some(w) = warnings.first() {
            return Err(Error::InvalidParams(w.to_string()));
        }
        Self::new(grid, params)
    }

    pub fn ordering_warnings(&self) -> Vec<OrderingWarning> {
        self.params.ordering_warnings()
    }

    /// Component count `J`.
    pub fn components(&self) -> usize {
        self.grid.stages()
    }

    pub fn pieces(&self) -> usize {
        self.grid.pieces()
    }

    pub fn grid(&self) -> &CutGrid {
        &self.grid
    }

    pub fn params(&self) -> &PlaParams {
        &self.params
    }

    /// Hazard multiplier of the stage minimum, `(J − j)·γ_j`.
    #[inline]
    pub fn stage_multiplier(&self, j: usize) -> f64 {
        (self.components() - j) as f64 * self.params.gamma(j)
    }

    fn check_stage(&self, j: usize) -> Result<()> {
        if j >= self.components() {
            return Err(Error::StageOutOfRange {
                stage: j,
                components: self.components(),
            });
        }
        Ok(())
    }

    fn check_time(&self, j: usize, t: f64) -> Result<()> {
        self.check_stage(j)?;
        let tau0 = self.grid.stage(j)[0];
        if t.is_nan() || t < tau0 {
            return Err(Error::BelowGrid { stage: j, t, tau0 });
        }
        Ok(())
    }

    // 0-based piece holding t under left-closed segments [τ_{k−1}, τ_k)
    #[inline]
    fn piece_of(&self, j: usize, t: f64) -> usize {
        let taus = self.grid.stage(j);
        taus[1..taus.len() - 1].partition_point(|&tau| tau <= t)
    }

    // base (γ-free) cumulative hazard; t ≥ τ_0
    #[inline]
    fn base_cum(&self, j: usize, t: f64) -> f64 {
        let k = self.piece_of(j, t);
        self.knots_cum[j][k] + self.params.slopes[k] * (t - self.grid.stage(j)[k])
    }

    /// Component hazard `λ^{(j)}(t)`.
    pub fn hazard(&self, j: usize, t: f64) -> Result<f64> {
        self.check_time(j, t)?;
        Ok(self.params.gamma(j) * self.params.slopes[self.piece_of(j, t)])
    }

    /// Component cumulative hazard `Λ^{(j)}(t)`, zero at `τ_0^{(j)}`.
    pub fn cum_hazard(&self, j: usize, t: f64) -> Result<f64> {
        self.check_time(j, t)?;
        Ok(self.params.gamma(j) * self.base_cum(j, t))
    }

    /// Survival function of the stage duration `Y^{(j)}`; 1 below `τ_0`.
    pub fn stage_sf(&self, j: usize, y: f64) -> Result<f64> {
        self.check_stage(j)?;
        if y <= self.grid.stage(j)[0] {
            return Ok(1.0);
        }
        Ok((-self.stage_multiplier(j) * self.base_cum(j, y)).exp())
    }

    pub fn stage_cdf(&self, j: usize, y: f64) -> Result<f64> {
        self.check_stage(j)?;
        if y <= self.grid.stage(j)[0] {
            return Ok(0.0);
        }
        Ok(-(-self.stage_multiplier(j) * self.base_cum(j, y)).exp_m1())
    }

    pub fn stage_pdf(&self, j: usize, y: f64) -> Result<f64> {
        self.check_stage(j)?;
        if y < self.grid.stage(j)[0] {
            return Ok(0.0);
        }
        let m = self.stage_multiplier(j);
        let k = self.piece_of(j, y);
        Ok(m * self.params.slopes[k] * (-m * self.base_cum(j, y)).exp())
    }

    /// Time at which the base cumulative hazard of stage `j` reaches `h ≥ 0`.
    #[inline]
    fn inverse_base_cum(&self, j: usize, h: f64) -> f64 {
        let cum = &self.knots_cum[j];
        let k = cum[1..cum.len() - 1].partition_point(|&c| c <= h);
        self.grid.stage(j)[k] + (h - cum[k]) / self.params.slopes[k]
    }

    /// Quantile function `η(p)` of `Y^{(j)}` (closed form, piecewise).
    pub fn quantile(&self, j: usize, p: f64) -> Result<f64> {
        self.check_stage(j)?;
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        let h = -(-p).ln_1p() / self.stage_multiplier(j);
        Ok(self.inverse_base_cum(j, h))
    }

    /// Maps a unit-rate exponential variate to a stage duration.
    #[inline]
    pub fn stage_from_exponential(&self, j: usize, e: f64) -> f64 {
        self.inverse_base_cum(j, e / self.stage_multiplier(j))
    }

    /// One draw of `Y^{(j)}` by inverse transform.
    pub fn sample_stage<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Result<f64> {
        self.check_stage(j)?;
        Ok(self.draw_stage(j, rng))
    }

    #[inline]
    fn draw_stage<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.stage_from_exponential(j, -u.ln())
    }

    /// Independent draws of every stage plus the system lifetime `T = Σ_j Y^{(j)}`.
    pub fn sample_system<R: Rng + ?Sized>(&self, rng: &mut R) -> SystemDraw {
        let gaps: Vec<f64> = (0..self.components())
            .map(|j| self.draw_stage(j, rng))
            .collect();
        let total = gaps.iter().sum();
        SystemDraw { gaps, total }
    }

    /// System lifetime only; same stream consumption as [`PlaModel::sample_system`].
    #[inline]
    pub fn sample_lifetime<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (0..self.components()).map(|j| self.draw_stage(j, rng)).sum()
    }

    /// Knots of stage `j` where hazard-based integrands have kinks.
    pub fn kinks(&self, j: usize) -> &[f64] {
        self.grid.stage(j)
    }

    /// Cumulative base hazard at the cut points of stage `j` (no γ factor).
    pub fn knot_base_cum(&self, j: usize) -> &[f64] {
        &self.knots_cum[j]
    }

    pub fn to_json(&self) -> String {
        fn num(out: &mut String, x: f64) {
            write!(out, "{x:.16e}").expect("writing to a String cannot fail");
        }
        fn list(out: &mut String, xs: &[f64]) {
            out.push('[');
            for (i, &x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                num(out, x);
            }
            out.push(']');
        }
        let mut s = String::new();
        write!(
            s,
            "{{\n  \"J\": {},\n  \"N\": {},\n  \"grid\": [",
            self.components(),
            self.pieces()
        )
        .unwrap();
        for (j, taus) in self.grid.as_rows().iter().enumerate() {
            if j > 0 {
                s.push_str(", ");
            }
            list(&mut s, taus);
        }
        s.push_str("],\n  \"slopes\": ");
        list(&mut s, &self.params.slopes);
        s.push_str(",\n  \"gammas\": ");
        list(&mut s, &self.params.gammas);
        s.push_str("\n}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            #[serde(rename = "J")]
            components: usize,
            #[serde(rename = "N")]
            pieces: usize,
            grid: Vec<Vec<f64>>,
            slopes: Vec<f64>,
            gammas: Vec<f64>,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let grid = CutGrid::new(doc.grid)?;
        if grid.stages() != doc.components || grid.pieces() != doc.pieces {
            return Err(Error::Parse(format!(
                "declared J={} N={} but grid is {}x{}",
                doc.components,
                doc.pieces,
                grid.stages(),
                grid.pieces() + 1
            )));
        }
        Self::new(grid, PlaParams::new(doc.slopes, doc.gammas)?)
    }
}

/// Stage durations of one simulated system and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDraw {
    pub gaps: Vec<f64>,
    pub total: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadConfig};
    use crate::rng::stream;
    use proptest::prelude::*;

    fn toy() -> PlaModel {
        let grid = CutGrid::new(vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]]).unwrap();
        PlaModel::new(grid, PlaParams::new(vec![1.0, 3.0], vec![5.0]).unwrap()).unwrap()
    }

    fn single_piece(b: f64, gamma: f64) -> PlaModel {
        let grid = CutGrid::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        PlaModel::new(grid, PlaParams::new(vec![b], vec![gamma]).unwrap()).unwrap()
    }

    /// Two-motor fit (knots at 207 and 55).
    pub(crate) fn two_motor_fit() -> PlaModel {
        let grid =
            CutGrid::new(vec![vec![65.0, 207.0, 263.0], vec![7.0, 55.0, 114.0]]).unwrap();
        PlaModel::new(
            grid,
            PlaParams::new(vec![0.003355360, 0.013441592], vec![4.271228525]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hazard_picks_segment_and_extends_last() {
        let m = toy();
        assert_eq!(m.hazard(0, 0.5).unwrap(), 1.0);
        assert_eq!(m.hazard(1, 2.0).unwrap(), 15.0);
        assert_eq!(m.hazard(1, 50.0).unwrap(), 15.0);
        assert_eq!(m.hazard(0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn fitted_two_motor_hazard_after_knot() {
        let m = two_motor_fit();
        let h = m.hazard(1, 55.0 + 1e-9).unwrap();
        assert!((h - 4.2712 * 0.0134).abs() < 5e-4, "{h}");
    }

    #[test]
    fn hazard_errors() {
        let m = toy();
        assert!(matches!(
            m.hazard(2, 0.5),
            Err(Error::StageOutOfRange { stage: 2, .. })
        ));
        let g = CutGrid::new(vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let m = PlaModel::new(g, PlaParams::new(vec![1.0], vec![2.0]).unwrap()).unwrap();
        assert!(matches!(m.hazard(0, 0.5), Err(Error::BelowGrid { .. })));
        assert!(matches!(m.cum_hazard(0, 0.5), Err(Error::BelowGrid { .. })));
    }

    #[test]
    fn cum_hazard_two_piece_sum_and_anchor() {
        let m = toy();
        assert!((m.cum_hazard(0, 1.5).unwrap() - 2.5).abs() < 1e-15);
        assert_eq!(m.cum_hazard(0, 0.0).unwrap(), 0.0);
        assert_eq!(m.cum_hazard(1, 0.0).unwrap(), 0.0);
        // beyond τ_N: 1 + 3 + 3·1, times γ=5
        assert!((m.cum_hazard(1, 3.0).unwrap() - 35.0).abs() < 1e-12);
    }

    #[test]
    fn cum_hazard_matches_quadrature_on_fitted_model() {
        let m = two_motor_fit();
        let oracle = integrate(
            |t| m.hazard(0, t).unwrap(),
            65.0,
            200.0,
            m.kinks(0),
            QuadConfig::default(),
        )
        .unwrap();
        assert!((m.cum_hazard(0, 200.0).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn stage_distribution_basics() {
        let m = single_piece(2.0, 3.0);
        let sf = m.stage_sf(0, 0.25).unwrap();
        assert!((sf - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(m.stage_cdf(0, 0.0).unwrap(), 0.0);
        let g = CutGrid::new(vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let shifted = PlaModel::new(g, PlaParams::new(vec![1.0], vec![2.0]).unwrap()).unwrap();
        assert_eq!(shifted.stage_sf(0, 0.5).unwrap(), 1.0);
        assert_eq!(shifted.stage_cdf(0, 0.5).unwrap(), 0.0);
        assert_eq!(shifted.stage_pdf(0, 0.5).unwrap(), 0.0);
        let m = two_motor_fit();
        for y in [70.0, 150.0, 207.0, 300.0] {
            let s = m.stage_sf(0, y).unwrap();
            let c = m.stage_cdf(0, y).unwrap();
            assert!((s + c - 1.0).abs() < 1e-15);
            let pdf = m.stage_pdf(0, y).unwrap();
            let expect = 2.0 * m.hazard(0, y).unwrap() * s;
            assert!((pdf - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_examples() {
        let m = single_piece(2.0, 1.5);
        assert_eq!(m.quantile(0, 0.0).unwrap(), 0.0);
        let q = m.quantile(0, 0.5).unwrap();
        assert!((q - std::f64::consts::LN_2 / 4.0).abs() < 1e-15);
        assert!(matches!(m.quantile(0, 1.0), Err(Error::InvalidProbability(_))));
        assert!(matches!(m.quantile(0, -0.1), Err(Error::InvalidProbability(_))));
        let fit = two_motor_fit();
        assert_eq!(fit.quantile(1, 0.0).unwrap(), 7.0);
    }

    #[test]
    fn quantile_matches_bisection_oracle() {
        let m = two_motor_fit();
        let target = 0.9;
        let (mut lo, mut hi) = (65.0, 10_000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if m.stage_cdf(0, mid).unwrap() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = m.quantile(0, target).unwrap();
        assert!((q - 0.5 * (lo + hi)).abs() < 1e-8, "{q} vs {lo}");
    }

    #[test]
    fn sampler_mean_for_exponential_stage() {
        let m = single_piece(0.5, 3.0);
        let mut rng = stream(11, 0);
        for (j, rate) in [(0usize, 2.0 * 0.5), (1, 3.0 * 0.5)] {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| m.sample_stage(j, &mut rng).unwrap()).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - 1.0 / rate).abs() < 3.0 * se, "stage {j}: {mean}");
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let m = two_motor_fit();
        let mut a = stream(42, 0);
        let mut b = stream(42, 0);
        for _ in 0..100 {
            assert_eq!(
                m.sample_system(&mut a).total.to_bits(),
                m.sample_system(&mut b).total.to_bits()
            );
        }
    }

    #[test]
    fn json_round_trip_and_format() {
        let m = two_motor_fit();
        let text = m.to_json();
        assert!(text.contains("\"J\": 2"));
        assert!(text.contains("6.5000000000000000e1"));
        let back = PlaModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert!(PlaModel::from_json("{\"J\":3,\"N\":1,\"grid\":[[0,1],[0,1]],\"slopes\":[1],\"gammas\":[2]}").is_err());
    }

    #[test]
    fn ordering_warnings_and_strictness() {
        let grid = CutGrid::new(vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]]).unwrap();
        let p = PlaParams::new(vec![3.0, 1.0], vec![0.8]).unwrap();
        let w = p.ordering_warnings();
        assert_eq!(w.len(), 2);
        assert!(PlaModel::new(grid.clone(), p.clone()).is_ok());
        assert!(PlaModel::new_strict(grid, p).is_err());
        assert!(PlaParams::new(vec![0.0], vec![]).is_err());
        assert!(PlaParams::new(vec![1.0], vec![-2.0]).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(CutGrid::new(vec![vec![0.0, 1.0, 1.0]]).is_err());
        assert!(CutGrid::new(vec![vec![0.0]]).is_err());
        assert!(CutGrid::new(vec![vec![0.0, 1.0], vec![0.0, 1.0, 2.0]]).is_err());
        assert!(CutGrid::new(vec![vec![-1.0, 1.0]]).is_err());
        assert!(CutGrid::new(vec![vec![0.0, f64::INFINITY]]).is_err());
    }

    fn random_model() -> impl Strategy<Value = PlaModel> {
        (2usize..4, 1usize..5)
            .prop_flat_map(|(j, n)| {
                (
                    prop::collection::vec(
                        (0.0f64..5.0, prop::collection::vec(0.05f64..3.0, n)),
                        j,
                    ),
                    prop::collection::vec(0.01f64..2.0, n),
                    prop::collection::vec(0.5f64..6.0, j - 1),
                )
            })
            .prop_map(|(stages, slopes, gammas)| {
                let grid = stages
                    .into_iter()
                    .map(|(start, widths)| {
                        let mut taus = vec![start];
                        for w in widths {
                            taus.push(taus.last().unwrap() + w);
                        }
                        taus
                    })
                    .collect();
                PlaModel::new(
                    CutGrid::new(grid).unwrap(),
                    PlaParams::new(slopes, gammas).unwrap(),
                )
                .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn continuity_at_interior_knots(m in random_model()) {
            for j in 0..m.components() {
                let taus = m.grid().stage(j).to_vec();
                for &tau in &taus[1..] {
                    let eps = 1e-9 * tau.max(1.0);
                    let left = m.cum_hazard(j, tau - eps).unwrap();
                    let right = m.cum_hazard(j, tau + eps).unwrap();
                    prop_assert!((left - right).abs() < 1e-6 * (1.0 + left.abs()));
                }
            }
        }

        #[test]
        fn stage_hazard_ratio_is_gamma_ratio(m in random_model(), frac in 0.0f64..1.0) {
            let t = 5.0 + 20.0 * frac;
            for j in 0..m.components() - 1 {
                let ratio = m.hazard(j + 1, t).unwrap() / m.hazard(j, t).unwrap();
                let expected = m.params().gamma(j + 1) / m.params().gamma(j);
                if m.grid().stage(j) == m.grid().stage(j + 1) {
                    prop_assert!((ratio - expected).abs() < 1e-12 * expected);
                }
            }
        }

        #[test]
        fn cum_hazard_increasing(m in random_model(), a in 0.0f64..30.0, d in 1e-6f64..5.0) {
            for j in 0..m.components() {
                let t0 = m.grid().stage(j)[0] + a;
                prop_assert!(m.cum_hazard(j, t0 + d).unwrap() > m.cum_hazard(j, t0).unwrap());
            }
        }

        #[test]
        fn quantile_cdf_round_trip(m in random_model()) {
            for j in 0..m.components() {
                for i in 0..1000 {
                    let p = i as f64 / 1000.0;
                    let y = m.quantile(j, p).unwrap();
                    let back = m.stage_cdf(j, y).unwrap();
                    prop_assert!((back - p).abs() < 1e-10, "j={} p={} back={}", j, p, back);
                }
            }
        }

        #[test]
        fn cum_hazard_equals_hazard_quadrature(m in random_model(), frac in 0.0f64..1.0) {
            for j in 0..m.components() {
                let taus = m.grid().stage(j);
                let t = taus[0] + frac * 1.5 * (taus[taus.len() - 1] - taus[0]);
                let oracle = integrate(|s| m.hazard(j, s).unwrap(), taus[0], t, taus, QuadConfig::default()).unwrap();
                let v = m.cum_hazard(j, t).unwrap();
                prop_assert!((v - oracle).abs() < 1e-10 * (1.0 + v.abs()));
            }
        }
    }
}
