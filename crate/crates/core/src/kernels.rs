//! Kernel functions and their one-sided moment constants.
//!
//! Only compactly supported kernels on `[-1, 1]` are admitted: the boundary
//! moment algebra used in the variance constant assumes compact support, so
//! the Gaussian kernel is deliberately not offered. All three families are
//! symmetric and integrate to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel family used for regression weighting and density estimation.
///
/// Triangular is the default: simple boundary kernels behave well in local
/// linear fits at a cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Uniform,
    #[default]
    Triangular,
    Epanechnikov,
}

impl Kernel {
    /// Evaluate the kernel at `u`. Zero outside `[-1, 1]`.
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Uniform => 0.5,
            Kernel::Triangular => 1.0 - a,
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
        }
    }

    /// Closed-form one-sided moments for this family.
    pub fn moments(self) -> KernelMoments {
        // kappa[q]  = integral over u > 0 of K(u) u^q du
        // kappa2[q] = integral over u > 0 of K(u)^2 u^q du
        let (kappa, kappa2) = match self {
            Kernel::Uniform => ([0.5, 0.25, 1.0 / 6.0], [0.25, 0.125, 1.0 / 12.0]),
            Kernel::Triangular => ([0.5, 1.0 / 6.0, 1.0 / 12.0], [1.0 / 3.0, 1.0 / 12.0, 1.0 / 30.0]),
            Kernel::Epanechnikov => ([0.5, 3.0 / 16.0, 0.1], [0.3, 3.0 / 32.0, 3.0 / 70.0]),
        };
        let cv = cv_constant(&kappa, &kappa2)
            .expect("admissible kernels have a positive variance-constant denominator");
        KernelMoments { kappa, kappa2, cv }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Uniform => "uniform",
            Kernel::Triangular => "triangular",
            Kernel::Epanechnikov => "epanechnikov",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Kernel::Uniform),
            "triangular" => Ok(Kernel::Triangular),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(Error::InvalidConfig(format!(
                "unknown kernel `{other}` (expected uniform|triangular|epanechnikov)"
            ))),
        }
    }
}

/// One-sided kernel moments entering the asymptotic variance of the
/// boundary local linear intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelMoments {
    /// `kappa[q]` for q = 0, 1, 2.
    pub kappa: [f64; 3],
    /// `kappa2[q]` for q = 0, 1, 2.
    pub kappa2: [f64; 3],
    /// Variance constant of the boundary intercept.
    pub cv: f64,
}

/// Variance constant of the local linear intercept at a boundary:
///
/// `(k2^2 k20 + k1^2 k22 - 2 k1 k2 k21) / (k2/2 - k1^2)^2`
///
/// Errors if the denominator is not strictly positive.
pub fn cv_constant(kappa: &[f64; 3], kappa2: &[f64; 3]) -> Result<f64> {
    let denom_root = 0.5 * kappa[2] - kappa[1] * kappa[1];
    if denom_root <= 0.0 {
        return Err(Error::DegenerateMoments);
    }
    let num = kappa[2] * kappa[2] * kappa2[0] + kappa[1] * kappa[1] * kappa2[2]
        - 2.0 * kappa[1] * kappa[2] * kappa2[1];
    Ok(num / (denom_root * denom_root))
}

pub const ALL_KERNELS: [Kernel; 3] = [Kernel::Uniform, Kernel::Triangular, Kernel::Epanechnikov];
