//! Kernel density estimators feeding the inverse weights: the covariate
//! marginal, the running-variable density at the cutoff, and the one-sided
//! (or pooled pre-treatment) joint densities at the cutoff.
//!
//! The primitives here operate on values exactly as given. The pipeline
//! bundle [`fit_density_estimates`] standardizes covariates by their sample
//! standard deviation first, so a single bandwidth is sensible across axes;
//! evaluators accept raw covariate values and return densities per unit of
//! raw covariate. Weight construction only ever uses ratios of these
//! densities, so the standardization scale cancels there.

use crate::bandwidth::BandwidthSet;
use crate::dataset::{Dataset, Side};
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Highest covariate dimension accepted by the joint estimators. Product
/// kernels degrade quickly with dimension, so anything larger is refused.
pub const MAX_COVARIATE_DIM: usize = 3;

/// Weighted sample sorted by value, with prefix sums of `w`, `w v` and
/// `w v^2`. Every admissible kernel is polynomial on its support, so a
/// kernel-weighted window sum reduces to a few prefix differences: one
/// evaluation costs two binary searches instead of a pass over the window.
#[derive(Debug, Clone)]
struct WeightedPrefix {
    vals: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl WeightedPrefix {
    /// Build from (value, weight) pairs; weights must be nonnegative.
    fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut vals = Vec::with_capacity(n);
        let (mut p0, mut p1, mut p2) =
            (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        p0.push(0.0);
        p1.push(0.0);
        p2.push(0.0);
        let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
        for &(v, w) in &pairs {
            vals.push(v);
            a0 += w;
            a1 += w * v;
            a2 += w * v * v;
            p0.push(a0);
            p1.push(a1);
            p2.push(a2);
        }
        WeightedPrefix { vals, p0, p1, p2 }
    }

    /// `sum_i w_i K((q - v_i)/h)` over the window `|v_i - q| <= h`.
    fn kernel_sum(&self, kernel: Kernel, q: f64, h: f64) -> f64 {
        let lo = self.vals.partition_point(|&v| v < q - h);
        let hi = self.vals.partition_point(|&v| v <= q + h);
        if lo >= hi {
            return 0.0;
        }
        let seg = |a: usize, b: usize| -> (f64, f64, f64) {
            (self.p0[b] - self.p0[a], self.p1[b] - self.p1[a], self.p2[b] - self.p2[a])
        };
        let total = match kernel {
            Kernel::Uniform => {
                let (c, _, _) = seg(lo, hi);
                0.5 * c
            }
            Kernel::Triangular => {
                // K = 1 - |q - v|/h, linear on each side of q
                let mid = self.vals.partition_point(|&v| v <= q);
                let mid = mid.clamp(lo, hi);
                let (cl, sl, _) = seg(lo, mid);
                let (cr, sr, _) = seg(mid, hi);
                cl * (1.0 - q / h) + sl / h + cr * (1.0 + q / h) - sr / h
            }
            Kernel::Epanechnikov => {
                // K = 0.75 (1 - (q - v)^2 / h^2), quadratic in v
                let (c, s1, s2) = seg(lo, hi);
                0.75 * (c * (1.0 - q * q / (h * h)) + (2.0 * q / (h * h)) * s1 - s2 / (h * h))
            }
        };
        // prefix cancellation can leave a tiny negative residue at the
        // window edge
        total.max(0.0)
    }
}

/// Product-kernel density estimate over a (possibly multivariate) sample.
///
/// Univariate samples evaluate through prefix sums; multivariate ones are
/// stored sorted by their first coordinate so evaluation only visits points
/// whose first coordinate lies within one bandwidth.
#[derive(Debug, Clone)]
pub struct ProductKde {
    rows: Vec<f64>,
    first: Vec<f64>,
    prefix: Option<WeightedPrefix>,
    k: usize,
    n_div: usize,
    h: f64,
    kernel: Kernel,
    scales: Vec<f64>,
}

impl ProductKde {
    pub(crate) fn from_rows(rows: Vec<Vec<f64>>, kernel: Kernel, h: f64, scales: Vec<f64>) -> Result<Self> {
        Self::new(rows, kernel, h, scales)
    }

    fn new(mut rows: Vec<Vec<f64>>, kernel: Kernel, h: f64, scales: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::NonPositiveBandwidth(h));
        }
        let k = rows[0].len();
        for row in rows.iter_mut() {
            for (v, &sc) in row.iter_mut().zip(scales.iter()) {
                *v /= sc;
            }
        }
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let first: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let n_div = rows.len();
        let prefix = (k == 1).then(|| WeightedPrefix::new(first.iter().map(|&v| (v, 1.0)).collect()));
        let flat = rows.into_iter().flatten().collect();
        Ok(ProductKde { rows: flat, first, prefix, k, n_div, h, kernel, scales })
    }

    /// Density at a raw point (length must equal the dimension).
    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.k);
        let p0 = point[0] / self.scales[0];
        let jac: f64 = self.scales.iter().product();
        if let Some(prefix) = &self.prefix {
            let acc = prefix.kernel_sum(self.kernel, p0, self.h);
            return acc / (self.n_div as f64 * self.h * jac);
        }
        let lo = self.first.partition_point(|&v| v < p0 - self.h);
        let hi = self.first.partition_point(|&v| v <= p0 + self.h);
        let mut acc = 0.0;
        for i in lo..hi {
            let row = &self.rows[i * self.k..(i + 1) * self.k];
            let mut prod = 1.0;
            for j in 0..self.k {
                prod *= self.kernel.eval((point[j] / self.scales[j] - row[j]) / self.h);
                if prod == 0.0 {
                    break;
                }
            }
            acc += prod;
        }
        acc / (self.n_div as f64 * self.h.powi(self.k as i32) * jac)
    }

    /// Univariate convenience form.
    pub fn eval1(&self, v: f64) -> f64 {
        self.eval(std::slice::from_ref(&v))
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }
}

/// Fit a univariate kernel density estimate:
/// `f(v) = (n h)^-1 sum_i K((v - v_i)/h)`.
pub fn fit_univariate_kde(values: &[f64], kernel: Kernel, h2: f64) -> Result<ProductKde> {
    ProductKde::new(values.iter().map(|&v| vec![v]).collect(), kernel, h2, vec![1.0])
}

/// Joint density evaluated at the cutoff in the running variable, as a
/// function of the covariates.
///
/// Covers both the one-sided boundary estimators (factor 2, sum over one
/// cutoff side, divided by the total sample size) and the pooled
/// pre-treatment estimator (factor 1, sum over everything).
#[derive(Debug, Clone)]
pub struct JointAtCutoff {
    z_rows: Vec<f64>,
    xw: Vec<f64>,
    prefix: Option<WeightedPrefix>,
    k: usize,
    n_div: usize,
    h1: f64,
    kernel: Kernel,
    factor: f64,
    scales: Vec<f64>,
}

impl JointAtCutoff {
    fn new(
        ds: &Dataset,
        rows: &[usize],
        factor: f64,
        kernel: Kernel,
        h1: f64,
        scales: &[f64],
    ) -> Result<Self> {
        if h1 <= 0.0 || !h1.is_finite() {
            return Err(Error::NonPositiveBandwidth(h1));
        }
        let k = ds.n_covariates();
        let c = ds.cutoff();
        let mut z_rows = Vec::new();
        let mut xw = Vec::new();
        for &i in rows {
            let w = kernel.eval((c - ds.x()[i]) / h1);
            if w > 0.0 {
                xw.push(w);
                for (j, col) in ds.covariates().iter().enumerate() {
                    z_rows.push(col[i] / scales[j]);
                }
            }
        }
        let prefix = (k == 1)
            .then(|| WeightedPrefix::new(z_rows.iter().copied().zip(xw.iter().copied()).collect()));
        Ok(JointAtCutoff {
            z_rows,
            xw,
            prefix,
            k,
            n_div: ds.n(),
            h1,
            kernel,
            factor,
            scales: scales.to_vec(),
        })
    }

    /// Estimate at the cutoff for raw covariate values `z`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.k);
        let jac: f64 = self.scales.iter().product();
        if let Some(prefix) = &self.prefix {
            let acc = prefix.kernel_sum(self.kernel, z[0] / self.scales[0], self.h1);
            return self.factor * acc / (self.n_div as f64 * self.h1 * self.h1 * jac);
        }
        let mut acc = 0.0;
        for (i, &w) in self.xw.iter().enumerate() {
            let row = &self.z_rows[i * self.k..(i + 1) * self.k];
            let mut prod = w;
            for j in 0..self.k {
                prod *= self.kernel.eval((z[j] / self.scales[j] - row[j]) / self.h1);
                if prod == 0.0 {
                    break;
                }
            }
            acc += prod;
        }
        self.factor * acc / (self.n_div as f64 * self.h1.powi(1 + self.k as i32) * jac)
    }

    pub fn eval1(&self, z: f64) -> f64 {
        self.eval(std::slice::from_ref(&z))
    }

    /// Multiply every evaluation by a constant; exists so tests can verify
    /// that weight construction is invariant to density scale.
    #[cfg(test)]
    pub(crate) fn scaled_for_tests(mut self, s: f64) -> Self {
        self.factor *= s;
        self
    }
}

/// Boundary-corrected one-sided joint density at the cutoff:
/// `2 (n h1^2)^-1 sum over the chosen side of K((c-x_i)/h1) K((z-z_i)/h1)`,
/// dividing by the total sample size.
pub fn fit_onesided_joint(ds: &Dataset, side: Side, kernel: Kernel, h1: f64) -> Result<JointAtCutoff> {
    let rows = ds.side_indices(side);
    if rows.is_empty() {
        return Err(Error::EmptySide(side.name()));
    }
    let scales = vec![1.0; ds.n_covariates()];
    JointAtCutoff::new(ds, &rows, 2.0, kernel, h1, &scales)
}

/// Pooled joint density at the cutoff for pre-treatment covariates: sums
/// over all observations, no boundary factor.
pub fn fit_pretreatment_joint(ds: &Dataset, kernel: Kernel, h1: f64) -> Result<JointAtCutoff> {
    let rows: Vec<usize> = (0..ds.n()).collect();
    let scales = vec![1.0; ds.n_covariates()];
    JointAtCutoff::new(ds, &rows, 1.0, kernel, h1, &scales)
}

/// Marginal density of the running variable at the cutoff:
/// `(n h2)^-1 sum_i K((c - x_i)/h2)`.
pub fn f_x_at_cutoff(ds: &Dataset, kernel: Kernel, h2: f64) -> Result<f64> {
    if h2 <= 0.0 || !h2.is_finite() {
        return Err(Error::NonPositiveBandwidth(h2));
    }
    let c = ds.cutoff();
    let acc: f64 = ds.x().iter().map(|&xi| kernel.eval((c - xi) / h2)).sum();
    Ok(acc / (ds.n() as f64 * h2))
}

/// Fitted density bundle consumed by the weight builder.
///
/// Under `pretreatment` the two joint evaluators are the same pooled
/// estimate; otherwise they are the boundary-corrected one-sided fits.
#[derive(Debug, Clone)]
pub struct DensityEstimates {
    pub f_z: Option<ProductKde>,
    pub f_x_at_c: f64,
    pub f_above: Option<JointAtCutoff>,
    pub f_below: Option<JointAtCutoff>,
    pub bandwidths: BandwidthSet,
    pub pretreatment: bool,
    pub z_scales: Vec<f64>,
}

impl DensityEstimates {
    pub fn joint(&self, side: Side) -> Result<&JointAtCutoff> {
        let j = match side {
            Side::Above => self.f_above.as_ref(),
            Side::Below => self.f_below.as_ref(),
        };
        j.ok_or(Error::MissingDensity("joint density at the cutoff"))
    }

    pub fn marginal(&self) -> Result<&ProductKde> {
        self.f_z.as_ref().ok_or(Error::MissingDensity("covariate marginal density"))
    }
}

/// Fit every density the weight schemes may need. Covariates are
/// standardized internally; evaluators take raw values.
pub fn fit_density_estimates(
    ds: &Dataset,
    kernel: Kernel,
    bw: &BandwidthSet,
    pretreatment: bool,
) -> Result<DensityEstimates> {
    let k = ds.n_covariates();
    if k > MAX_COVARIATE_DIM {
        return Err(Error::InvalidConfig(format!(
            "joint density estimation supports at most {MAX_COVARIATE_DIM} covariates, got {k}"
        )));
    }
    let f_x_at_c = f_x_at_cutoff(ds, kernel, bw.h2)?;
    if k == 0 {
        return Ok(DensityEstimates {
            f_z: None,
            f_x_at_c,
            f_above: None,
            f_below: None,
            bandwidths: *bw,
            pretreatment,
            z_scales: vec![],
        });
    }
    let scales = ds.covariate_scales();
    let rows: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.covariate_row(i)).collect();
    let f_z = ProductKde::new(rows, kernel, bw.h2, scales.clone())?;
    let (f_above, f_below) = if pretreatment {
        let all: Vec<usize> = (0..ds.n()).collect();
        let pooled = JointAtCutoff::new(ds, &all, 1.0, kernel, bw.h1, &scales)?;
        (pooled.clone(), pooled)
    } else {
        let above = ds.side_indices(Side::Above);
        let below = ds.side_indices(Side::Below);
        if above.is_empty() {
            return Err(Error::EmptySide(Side::Above.name()));
        }
        if below.is_empty() {
            return Err(Error::EmptySide(Side::Below.name()));
        }
        (
            JointAtCutoff::new(ds, &above, 2.0, kernel, bw.h1, &scales)?,
            JointAtCutoff::new(ds, &below, 2.0, kernel, bw.h1, &scales)?,
        )
    };
    Ok(DensityEstimates {
        f_z: Some(f_z),
        f_x_at_c,
        f_above: Some(f_above),
        f_below: Some(f_below),
        bandwidths: *bw,
        pretreatment,
        z_scales: scales,
    })
}
