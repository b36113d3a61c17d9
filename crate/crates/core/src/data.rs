use crate::error::{Error, Result};

/// Inter-failure gap times `y_i^{(j)}` of `n` systems with `J` components.
///
/// Stored column-wise: `stage(j)` is the vector of durations of stage `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadShareData {
    stages: Vec<Vec<f64>>,
}

impl LoadShareData {
    pub fn from_columns(stages: Vec<Vec<f64>>) -> Result<Self> {
        let d = Self::unchecked(stages)?;
        let (n, j) = (d.n(), d.components());
        if n < j + 1 {
            return Err(Error::InvalidData(format!(
                "{n} systems is too few to fit {j} stages (need at least {})",
                j + 1
            )));
        }
        Ok(d)
    }

    /// Validates entries but not the sample-size floor; used for tiny fixtures.
    pub fn unchecked(stages: Vec<Vec<f64>>) -> Result<Self> {
        if stages.is_empty() || stages[0].is_empty() {
            return Err(Error::InvalidData("no records".into()));
        }
        let n = stages[0].len();
        for (j, col) in stages.iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidData(format!(
                    "stage {j} has {} values, stage 0 has {n}",
                    col.len()
                )));
            }
            if let Some((i, y)) = col
                .iter()
                .enumerate()
                .find(|(_, y)| !(y.is_finite() && **y > 0.0))
            {
                return Err(Error::InvalidData(format!(
                    "gap y[{i}][{j}] = {y} must be positive and finite"
                )));
            }
        }
        Ok(Self { stages })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidData("no records".into()));
        }
        let j = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != j) {
            return Err(Error::InvalidData(format!(
                "row {i} has {} stages, expected {j}",
                rows[i].len()
            )));
        }
        Self::from_columns((0..j).map(|s| rows.iter().map(|r| r[s]).collect()).collect())
    }

    /// Sample size `n`.
    pub fn n(&self) -> usize {
        self.stages[0].len()
    }

    /// Component count `J`.
    pub fn components(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, j: usize) -> &[f64] {
        &self.stages[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.stages
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.stages.iter().map(|c| c[i]).collect()
    }

    pub fn system_lifetimes(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.stages.iter().map(|c| c[i]).sum()).collect()
    }

    pub fn min(&self, j: usize) -> f64 {
        self.stages[j].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self, j: usize) -> f64 {
        self.stages[j].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.stages[j].iter().sum::<f64>() / self.n() as f64
    }

    /// Sample standard deviation (divisor `n - 1`).
    pub fn sd(&self, j: usize) -> f64 {
        let m = self.mean(j);
        let ss: f64 = self.stages[j].iter().map(|y| (y - m).powi(2)).sum();
        (ss / (self.n() as f64 - 1.0)).sqrt()
    }

    /// Same data with every gap multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::unchecked(
            self.stages
                .iter()
                .map(|s| s.iter().map(|y| y * c).collect())
                .collect(),
        )
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}
