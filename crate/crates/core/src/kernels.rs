//! Separable regularizer kernels on `[0, 1]`.
//!
//! A kernel `theta` induces the regularizer `h(y) = sum_i theta(y_i)` on the
//! probability simplex. Every scalar map used downstream (derivatives, the
//! truncated inverse `phi`, the conjugate, the dual potential) is evaluated in
//! closed form here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest Tsallis index with a strictly positive curvature floor on `(0, 1]`.
pub const TSALLIS_Q_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// `u ln u`, the negative Shannon entropy.
    Entropic,
    /// `u^2 / 2`.
    Euclidean,
    /// `(u^q - u) / (q - 1)`.
    Tsallis { q: f64 },
}

/// Norm pairing under which the strong-convexity modulus of `h` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormProfile {
    /// Primal `l1`, dual `l_inf`.
    L1withLinfDual,
    /// Self-dual `l2`.
    L2selfDual,
}

impl NormProfile {
    /// `sup_{u != 0} ||u||_inf / ||u||`.
    pub fn c_norm(self) -> f64 {
        1.0
    }

    /// `sup_{u in [-1,1]^m} ||u||_*`.
    pub fn dual_ball_radius(self, m: usize) -> f64 {
        match self {
            NormProfile::L1withLinfDual => 1.0,
            NormProfile::L2selfDual => (m as f64).sqrt(),
        }
    }

    /// Diameter of the probability simplex in the primal norm.
    pub fn simplex_diameter(self) -> f64 {
        match self {
            NormProfile::L1withLinfDual => 2.0,
            NormProfile::L2selfDual => std::f64::consts::SQRT_2,
        }
    }

    pub fn primal_norm(self, u: &[f64]) -> f64 {
        match self {
            NormProfile::L1withLinfDual => u.iter().map(|v| v.abs()).sum(),
            NormProfile::L2selfDual => u.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    pub fn dual_norm(self, u: &[f64]) -> f64 {
        match self {
            NormProfile::L1withLinfDual => u.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())),
            NormProfile::L2selfDual => u.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Boundary and curvature metadata of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelGeometry {
    /// `theta'(0+)`; `f64::NEG_INFINITY` for steep kernels.
    pub boundary_slope: f64,
    pub is_steep: bool,
    /// `theta*(theta'(0+))`, with `theta*(-inf) = 0`.
    pub boundary_energy: f64,
    pub strong_convexity_alpha: f64,
    pub norm_profile: NormProfile,
}

/// A validated separable kernel. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
}

impl Kernel {
    pub fn entropic() -> Self {
        Kernel { family: KernelFamily::Entropic }
    }

    pub fn euclidean() -> Self {
        Kernel { family: KernelFamily::Euclidean }
    }

    /// Tsallis kernel with index `q` in `(0, 1) ∪ (1, 2]`.
    ///
    /// `q = 1` is the entropic limit and must be requested as such. Above
    /// `q = 2` the curvature `q u^(q-2)` vanishes at the boundary, so no
    /// strong-convexity modulus exists.
    pub fn tsallis(q: f64) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 {
            return Err(Error::Domain(format!("tsallis index must be positive, got {q}")));
        }
        if q == 1.0 {
            return Err(Error::Domain(
                "tsallis index q = 1 is the entropic kernel; select `entropic`".into(),
            ));
        }
        if q > TSALLIS_Q_MAX {
            return Err(Error::Domain(format!(
                "tsallis index q = {q} > {TSALLIS_Q_MAX} is not strongly convex on the simplex"
            )));
        }
        Ok(Kernel { family: KernelFamily::Tsallis { q } })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn geometry(&self) -> KernelGeometry {
        let boundary_slope = self.boundary_slope();
        let is_steep = boundary_slope == f64::NEG_INFINITY;
        let (alpha, norm_profile) = match self.family {
            KernelFamily::Entropic => (1.0, NormProfile::L1withLinfDual),
            KernelFamily::Euclidean => (1.0, NormProfile::L2selfDual),
            KernelFamily::Tsallis { q } => (q, NormProfile::L2selfDual),
        };
        KernelGeometry {
            boundary_slope,
            is_steep,
            boundary_energy: self.theta_conj(boundary_slope),
            strong_convexity_alpha: alpha,
            norm_profile,
        }
    }

    pub fn boundary_slope(&self) -> f64 {
        match self.family {
            KernelFamily::Entropic => f64::NEG_INFINITY,
            KernelFamily::Euclidean => 0.0,
            KernelFamily::Tsallis { q } if q < 1.0 => f64::NEG_INFINITY,
            KernelFamily::Tsallis { q } => -1.0 / (q - 1.0),
        }
    }

    pub fn is_steep(&self) -> bool {
        self.boundary_slope() == f64::NEG_INFINITY
    }

    pub fn alpha(&self) -> f64 {
        self.geometry().strong_convexity_alpha
    }

    pub fn norm_profile(&self) -> NormProfile {
        self.geometry().norm_profile
    }

    pub fn theta(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        Ok(self.theta_unchecked(u))
    }

    pub(crate) fn theta_unchecked(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Entropic => {
                if u > 0.0 {
                    u * u.ln()
                } else {
                    0.0
                }
            }
            KernelFamily::Euclidean => 0.5 * u * u,
            KernelFamily::Tsallis { q } => (u.powf(q) - u) / (q - 1.0),
        }
    }

    pub fn theta_prime(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            if u == 0.0 && !self.is_steep() {
                return Ok(self.boundary_slope());
            }
            return Err(Error::Domain(format!("theta' requires u in (0, 1], got {u}")));
        }
        Ok(self.theta_prime_unchecked(u))
    }

    pub(crate) fn theta_prime_unchecked(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Entropic => 1.0 + u.ln(),
            KernelFamily::Euclidean => u,
            KernelFamily::Tsallis { q } => (q * u.powf(q - 1.0) - 1.0) / (q - 1.0),
        }
    }

    pub fn theta_second(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("theta'' requires u in (0, 1], got {u}")));
        }
        Ok(self.theta_second_unchecked(u))
    }

    pub(crate) fn theta_second_unchecked(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Entropic => 1.0 / u,
            KernelFamily::Euclidean => 1.0,
            KernelFamily::Tsallis { q } => q * u.powf(q - 2.0),
        }
    }

    /// `trunc_[0,1]((theta')^{-1})(z)`. Accepts `-inf`.
    pub fn phi(&self, z: f64) -> f64 {
        if z >= 1.0 {
            // theta'(1) = 1 for every supported family.
            return 1.0;
        }
        match self.family {
            KernelFamily::Entropic => (z - 1.0).exp(),
            KernelFamily::Euclidean => z.max(0.0),
            KernelFamily::Tsallis { q } => {
                let base = ((1.0 + (q - 1.0) * z) / q).max(0.0);
                if base == 0.0 {
                    0.0
                } else {
                    base.powf(1.0 / (q - 1.0)).min(1.0)
                }
            }
        }
    }

    /// Scalar conjugate `sup_{u in [0,1]} { z u - theta(u) }`. Accepts `-inf`.
    pub fn theta_conj(&self, z: f64) -> f64 {
        if z > 1.0 {
            return z - self.theta_unchecked(1.0);
        }
        match self.family {
            KernelFamily::Entropic => (z - 1.0).exp(),
            KernelFamily::Euclidean => {
                if z < 0.0 {
                    0.0
                } else {
                    0.5 * z * z
                }
            }
            KernelFamily::Tsallis { q } => {
                let base = ((1.0 + (q - 1.0) * z) / q).max(0.0);
                if base == 0.0 {
                    0.0
                } else {
                    base.powf(q / (q - 1.0))
                }
            }
        }
    }

    /// `V(u) = theta*(theta'(u)) = u theta'(u) - theta(u)`.
    pub fn dual_potential(&self, u: f64) -> Result<f64> {
        if u == 0.0 && !self.is_steep() {
            return Ok(-self.theta_unchecked(0.0));
        }
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::Domain(format!("dual potential requires u in (0, 1], got {u}")));
        }
        Ok(self.dual_potential_unchecked(u))
    }

    pub(crate) fn dual_potential_unchecked(&self, u: f64) -> f64 {
        match self.family {
            KernelFamily::Entropic => u,
            KernelFamily::Euclidean => 0.5 * u * u,
            KernelFamily::Tsallis { q } => u.powf(q),
        }
    }

    /// `sup_{u in [lo, hi]} theta''(u)`. Every supported family has
    /// non-increasing curvature, so the supremum sits at `lo`.
    pub fn max_curvature(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Domain(format!("curvature interval [{lo}, {hi}] not inside (0, 1]")));
        }
        Ok(self.theta_second_unchecked(lo).max(self.theta_second_unchecked(hi)))
    }

    /// `min_simplex h = m theta(1/m)`, attained at the uniform point.
    pub fn h_min(&self, m: usize) -> f64 {
        m as f64 * self.theta_unchecked(1.0 / m as f64)
    }

    /// `max_simplex h = theta(1) + (m-1) theta(0)`, attained at any vertex.
    pub fn h_max(&self, m: usize) -> f64 {
        self.theta_unchecked(1.0) + (m as f64 - 1.0) * self.theta_unchecked(0.0)
    }

    /// `h(y) = sum_i theta(y_i)`.
    pub fn h(&self, y: &[f64]) -> f64 {
        y.iter().map(|&u| self.theta_unchecked(u.clamp(0.0, 1.0))).sum()
    }
}

fn check_unit(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!("kernel argument must lie in [0, 1], got {u}")))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Entropic => write!(f, "entropic"),
            KernelFamily::Euclidean => write!(f, "euclidean"),
            KernelFamily::Tsallis { q } => write!(f, "tsallis:{q}"),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    /// `entropic` | `euclidean` | `tsallis:<q>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropic" => Ok(Kernel::entropic()),
            "euclidean" => Ok(Kernel::euclidean()),
            other => {
                let q = other
                    .strip_prefix("tsallis:")
                    .ok_or_else(|| Error::Parse(format!("unknown kernel selector `{other}`")))?;
                let q: f64 = q
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid tsallis index `{q}`")))?;
                Kernel::tsallis(q)
            }
        }
    }
}
