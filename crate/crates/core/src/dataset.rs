//! Observed sample: outcome, running variable, covariates, treatment.

use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum sample size accepted by the validators.
pub const MIN_SAMPLE: usize = 10;

/// Cutoff side of an observation. `Above` is the treated side in a sharp
/// design (`x > cutoff`); observations with `x == cutoff` fall below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Above,
    Below,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Above => "treated",
            Side::Below => "control",
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Above => Side::Below,
            Side::Below => Side::Above,
        }
    }
}

/// An observed sample around a known cutoff.
///
/// Covariates are stored column-wise; `z[j]` is the j-th covariate across
/// all observations. A dataset may have no covariates at all, in which case
/// only the unweighted estimand is available.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    z: Vec<Vec<f64>>,
    t: Vec<u8>,
    cutoff: f64,
}

impl Dataset {
    /// Sharp-design constructor: derives `t = 1(x > cutoff)`.
    pub fn new_sharp(y: Vec<f64>, x: Vec<f64>, z: Vec<Vec<f64>>, cutoff: f64) -> Result<Self> {
        let t = x.iter().map(|&xi| u8::from(xi > cutoff)).collect();
        Self::build(y, x, z, t, cutoff)
    }

    /// Sharp-design constructor with a caller-provided treatment column;
    /// errors on the first row contradicting `t = 1(x > cutoff)`.
    pub fn new_sharp_checked(
        y: Vec<f64>,
        x: Vec<f64>,
        z: Vec<Vec<f64>>,
        t: Vec<u8>,
        cutoff: f64,
    ) -> Result<Self> {
        for (i, (&xi, &ti)) in x.iter().zip(&t).enumerate() {
            if ti != u8::from(xi > cutoff) {
                return Err(Error::SharpContradiction { row: i + 1 });
            }
        }
        Self::build(y, x, z, t, cutoff)
    }

    /// Fuzzy-design constructor: `t` may deviate from the cutoff rule.
    pub fn new_fuzzy(y: Vec<f64>, x: Vec<f64>, z: Vec<Vec<f64>>, t: Vec<u8>, cutoff: f64) -> Result<Self> {
        Self::build(y, x, z, t, cutoff)
    }

    fn build(y: Vec<f64>, x: Vec<f64>, z: Vec<Vec<f64>>, t: Vec<u8>, cutoff: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if n < MIN_SAMPLE {
            return Err(Error::InvalidConfig(format!(
                "need at least {MIN_SAMPLE} observations, got {n}"
            )));
        }
        if x.len() != n || t.len() != n || z.iter().any(|col| col.len() != n) {
            return Err(Error::InvalidConfig(
                "outcome, running variable, treatment and covariate columns must have equal length".into(),
            ));
        }
        if !cutoff.is_finite() {
            return Err(Error::InvalidConfig("cutoff must be finite".into()));
        }
        let finite = y.iter().chain(x.iter()).chain(z.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("all values must be finite (no missing data)".into()));
        }
        if t.iter().any(|&ti| ti > 1) {
            return Err(Error::InvalidConfig("treatment indicator must be 0 or 1".into()));
        }
        Ok(Dataset { y, x, z, t, cutoff })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.z.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> &[u8] {
        &self.t
    }

    pub fn covariate(&self, j: usize) -> &[f64] {
        &self.z[j]
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn side_of(&self, i: usize) -> Side {
        if self.x[i] > self.cutoff {
            Side::Above
        } else {
            Side::Below
        }
    }

    /// Indices on one cutoff side, in dataset order.
    pub fn side_indices(&self, side: Side) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.side_of(i) == side).collect()
    }

    /// True when the stored treatment column equals the sharp rule everywhere.
    pub fn is_sharp(&self) -> bool {
        self.x
            .iter()
            .zip(&self.t)
            .all(|(&xi, &ti)| ti == u8::from(xi > self.cutoff))
    }

    /// Sample standard deviation (n-1 denominator) of the running variable.
    pub fn x_scale(&self) -> f64 {
        sample_std(&self.x)
    }

    /// Per-covariate sample standard deviations, with degenerate columns
    /// mapped to 1 so they pass through unscaled.
    pub fn covariate_scales(&self) -> Vec<f64> {
        self.z
            .iter()
            .map(|col| {
                let s = sample_std(col);
                if s.is_finite() && s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Row i as a covariate vector.
    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        self.z.iter().map(|col| col[i]).collect()
    }

    /// Gather a resampled dataset from row indices (with repetition).
    pub fn resample(&self, idx: &[usize]) -> Dataset {
        let gather = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Dataset {
            y: gather(&self.y),
            x: gather(&self.x),
            z: self.z.iter().map(|col| gather(col)).collect(),
            t: idx.iter().map(|&i| self.t[i]).collect(),
            cutoff: self.cutoff,
        }
    }

    /// Copy with the outcome replaced (used to run the jump estimator on a
    /// covariate or on the treatment indicator).
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Dataset> {
        Self::build(y, self.x.clone(), self.z.clone(), self.t.clone(), self.cutoff)
    }
}

pub(crate) fn sample_std(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let ss = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>();
    (ss / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs() -> Vec<f64> {
        (0..12).map(|i| i as f64 - 6.0).collect()
    }

    #[test]
    fn sharp_derives_treatment() {
        let ds = Dataset::new_sharp(vec![1.0; 12], xs(), vec![], 0.0).unwrap();
        assert!(ds.is_sharp());
        // x == cutoff belongs below
        let i_zero = xs().iter().position(|&x| x == 0.0).unwrap();
        assert_eq!(ds.t()[i_zero], 0);
        assert_eq!(ds.side_of(i_zero), Side::Below);
    }

    #[test]
    fn sharp_contradiction_reports_row() {
        let mut t: Vec<u8> = xs().iter().map(|&x| u8::from(x > 0.0)).collect();
        t[3] = 1 - t[3];
        let err = Dataset::new_sharp_checked(vec![0.0; 12], xs(), vec![], t, 0.0).unwrap_err();
        assert!(matches!(err, Error::SharpContradiction { row: 4 }));
    }

    #[test]
    fn rejects_non_finite_and_short() {
        let mut y = vec![0.0; 12];
        y[5] = f64::NAN;
        assert!(Dataset::new_sharp(y, xs(), vec![], 0.0).is_err());
        assert!(Dataset::new_sharp(vec![0.0; 5], vec![0.0; 5], vec![], 0.0).is_err());
    }

    #[test]
    fn resample_gathers_rows() {
        let ds = Dataset::new_sharp((0..12).map(|i| i as f64).collect(), xs(), vec![vec![2.0; 12]], 0.0).unwrap();
        let rs = ds.resample(&[0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 11]);
        assert_eq!(rs.n(), 12);
        assert_eq!(rs.y()[0], 0.0);
        assert_eq!(rs.y()[1], 0.0);
        assert_eq!(rs.y()[11], 11.0);
    }

    #[test]
    fn degenerate_covariate_scale_is_one() {
        let ds = Dataset::new_sharp(vec![0.0; 12], xs(), vec![vec![3.0; 12]], 0.0).unwrap();
        assert_eq!(ds.covariate_scales(), vec![1.0]);
    }
}
