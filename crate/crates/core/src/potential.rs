//! Logarithmic (Flory-Huggins) potential
//! `F(r) = (θ/2)[(1+r)ln(1+r) + (1-r)ln(1-r)] + (1-r²)/2`
//! and its C² quadratic-tail regularization.

use crate::error::{Error, Result};

/// Margin kept away from ±1 when iterating with the sharp potential.
pub const SHARP_MARGIN: f64 = 1e-12;

/// Temperature and regularization width. `delta == 0` selects the sharp
/// potential, which is only defined on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    pub theta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Lower,
    Middle,
    Upper,
}

/// `x ln x`, continuous at zero.
fn xlogx_1p(x: f64, s: f64) -> f64 {
    // x = 1 + s, computed in log1p form
    if x == 0.0 {
        0.0
    } else {
        x * s.ln_1p()
    }
}

impl PotentialParams {
    pub fn new(theta: f64, delta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::config("theta", theta, "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::config("delta", delta, "must lie in [0, 1)"));
        }
        Ok(Self { theta, delta })
    }

    pub fn is_sharp(&self) -> bool {
        self.delta == 0.0
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.theta, delta)
    }

    fn branch(&self, r: f64) -> Result<Branch> {
        if r.is_nan() {
            return Err(Error::Domain {
                value: r,
                domain: "finite real",
            });
        }
        if self.is_sharp() {
            if !(-1.0..=1.0).contains(&r) {
                return Err(Error::Domain {
                    value: r,
                    domain: "[-1, 1] for the sharp potential",
                });
            }
            return Ok(Branch::Middle);
        }
        let knot = 1.0 - self.delta;
        Ok(if r >= knot {
            Branch::Upper
        } else if r <= -knot {
            Branch::Lower
        } else {
            Branch::Middle
        })
    }

    fn open_interval(&self, r: f64) -> Result<()> {
        if self.is_sharp() && !(r > -1.0 && r < 1.0) {
            return Err(Error::Domain {
                value: r,
                domain: "(-1, 1) for derivatives of the sharp potential",
            });
        }
        Ok(())
    }

    /// Entropy part without the θ/2 factor: sharp `F_ln` in the middle,
    /// quadratic extensions beyond `±(1-δ)`.
    pub fn entropy(&self, r: f64) -> Result<f64> {
        let d = self.delta;
        Ok(match self.branch(r)? {
            Branch::Middle => xlogx_1p(1.0 + r, r) + xlogx_1p(1.0 - r, -r),
            Branch::Upper => {
                (1.0 - r) * d.ln()
                    + (1.0 + r) * (2.0 - d).ln()
                    + (1.0 - r).powi(2) / (2.0 * d)
                    + (1.0 + r).powi(2) / (2.0 * (2.0 - d))
                    - 1.0
            }
            Branch::Lower => {
                (1.0 + r) * d.ln()
                    + (1.0 - r) * (2.0 - d).ln()
                    + (1.0 + r).powi(2) / (2.0 * d)
                    + (1.0 - r).powi(2) / (2.0 * (2.0 - d))
                    - 1.0
            }
        })
    }

    /// `F(r)` (or `F^δ(r)`).
    pub fn f_value(&self, r: f64) -> Result<f64> {
        Ok(0.5 * self.theta * self.entropy(r)? + 0.5 * (1.0 - r * r))
    }

    /// `φ = F_ln'` (or its regularization), so that `F' = (θ/2)φ - r`.
    pub fn phi(&self, r: f64) -> Result<f64> {
        self.open_interval(r)?;
        let d = self.delta;
        Ok(match self.branch(r)? {
            Branch::Middle => r.ln_1p() - (-r).ln_1p(),
            Branch::Upper => -d.ln() + (2.0 - d).ln() - (1.0 - r) / d + (1.0 + r) / (2.0 - d),
            Branch::Lower => d.ln() - (2.0 - d).ln() + (1.0 + r) / d - (1.0 - r) / (2.0 - d),
        })
    }

    /// `φ'`; bounded by `2/δ` when regularized.
    pub fn phi_prime(&self, r: f64) -> Result<f64> {
        self.open_interval(r)?;
        let d = self.delta;
        Ok(match self.branch(r)? {
            Branch::Middle => 1.0 / (1.0 + r) + 1.0 / (1.0 - r),
            Branch::Upper | Branch::Lower => 1.0 / d + 1.0 / (2.0 - d),
        })
    }

    /// `F'(r) = (θ/2)φ(r) - r`.
    pub fn f_prime(&self, r: f64) -> Result<f64> {
        Ok(0.5 * self.theta * self.phi(r)? - r)
    }

    /// `F''(r) = (θ/2)φ'(r) - 1`.
    pub fn f_second(&self, r: f64) -> Result<f64> {
        Ok(0.5 * self.theta * self.phi_prime(r)? - 1.0)
    }

    /// Interval on which Newton iterates avoid branch switches; used only to
    /// choose damping.
    pub fn newton_safeguard_region(&self) -> (f64, f64) {
        if self.is_sharp() {
            (-1.0 + SHARP_MARGIN, 1.0 - SHARP_MARGIN)
        } else {
            (-1.0 + self.delta, 1.0 - self.delta)
        }
    }
}
