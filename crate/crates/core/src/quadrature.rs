//! Triangle quadrature rules for nonlinear integrands.

use serde::{Deserialize, Serialize};

/// Barycentric point and weight as a fraction of the element area.
pub type QuadraturePoint = ([f64; 3], f64);

const VERTEX: [QuadraturePoint; 3] = [
    ([1.0, 0.0, 0.0], 1.0 / 3.0),
    ([0.0, 1.0, 0.0], 1.0 / 3.0),
    ([0.0, 0.0, 1.0], 1.0 / 3.0),
];

const EDGE_MIDPOINT: [QuadraturePoint; 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

// Dunavant, degree 4.
const A1: f64 = 0.445_948_490_915_965;
const B1: f64 = 1.0 - 2.0 * A1;
const W1: f64 = 0.223_381_589_678_011_5;
const A2: f64 = 0.091_576_213_509_770_74;
const B2: f64 = 1.0 - 2.0 * A2;
const W2: f64 = 0.109_951_743_655_321_87;

const GAUSS6: [QuadraturePoint; 6] = [
    ([A1, A1, B1], W1),
    ([A1, B1, A1], W1),
    ([B1, A1, A1], W1),
    ([A2, A2, B2], W2),
    ([A2, B2, A2], W2),
    ([B2, A2, A2], W2),
];

/// How zeroth-order integrals are evaluated on each triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraturePolicy {
    /// Vertex rule; mass-type matrices become diagonal.
    Lumped,
    /// Edge-midpoint rule, exact for quadratics.
    #[default]
    Midpoint3,
    /// Six-point rule, exact for quartics.
    Gauss6,
}

impl QuadraturePolicy {
    pub fn points(&self) -> &'static [QuadraturePoint] {
        match self {
            QuadraturePolicy::Lumped => &VERTEX,
            QuadraturePolicy::Midpoint3 => &EDGE_MIDPOINT,
            QuadraturePolicy::Gauss6 => &GAUSS6,
        }
    }

    pub fn is_lumped(&self) -> bool {
        matches!(self, QuadraturePolicy::Lumped)
    }

    /// Element matrix `∫_T χ_j χ_k` under this policy.
    pub fn local_mass(&self, area: f64) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (j, row) in m.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = if self.is_lumped() {
                    if j == k {
                        area / 3.0
                    } else {
                        0.0
                    }
                } else if j == k {
                    area / 6.0
                } else {
                    area / 12.0
                };
            }
        }
        m
    }

    /// `∫_T f(u_h) χ_i` for `i = 0..3` with nodal values `u`.
    pub fn integrate_against_basis(&self, area: f64, u: [f64; 3], mut f: impl FnMut(f64) -> f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (lam, w) in self.points() {
            let val = f(lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2]) * w * area;
            for i in 0..3 {
                out[i] += val * lam[i];
            }
        }
        out
    }

    /// Values of the interpolant at the quadrature points.
    pub fn interpolate(&self, u: [f64; 3]) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points()
            .iter()
            .map(move |(lam, w)| (lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2], *w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Exact ∫_T λ₁^a λ₂^b λ₃^c / |T| = 2 a! b! c! / (a+b+c+2)!.
    fn monomial_exact(a: u32, b: u32, c: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    fn rule_value(rule: QuadraturePolicy, a: u32, b: u32, c: u32) -> f64 {
        rule.points()
            .iter()
            .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
            .sum()
    }

    #[test]
    fn weights_sum_to_one() {
        for rule in [QuadraturePolicy::Lumped, QuadraturePolicy::Midpoint3, QuadraturePolicy::Gauss6] {
            let s: f64 = rule.points().iter().map(|p| p.1).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degrees_of_exactness() {
        for (rule, degree) in [
            (QuadraturePolicy::Lumped, 1),
            (QuadraturePolicy::Midpoint3, 2),
            (QuadraturePolicy::Gauss6, 4),
        ] {
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    for c in 0..=(degree - a - b) {
                        let err = (rule_value(rule, a, b, c) - monomial_exact(a, b, c)).abs();
                        assert!(err < 1e-14, "{rule:?} λ^({a},{b},{c}) err {err}");
                    }
                }
            }
        }
    }

    #[test]
    fn consistent_mass_matches_quadrature() {
        let m = QuadraturePolicy::Midpoint3.local_mass(0.6);
        for j in 0..3 {
            let row = QuadraturePolicy::Gauss6.integrate_against_basis(0.6, [(j == 0) as u8 as f64, (j == 1) as u8 as f64, (j == 2) as u8 as f64], |x| x);
            for i in 0..3 {
                assert!((row[i] - m[j][i]).abs() < 1e-15);
            }
        }
    }
}
