//! Gauss–Jacobi rules from the Golub–Welsch eigenproblem and an adaptive
//! Gauss–Kronrod (7/15) integrator for real or complex integrands.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::{IflError, Result};

/// Nodes and weights of an interpolatory rule.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// The same rule after the affine change of variable `[-1, 1] -> [a, b]`;
    /// weights absorb the Jacobian only, so any weight function is carried
    /// over in the new variable up to its own scaling.
    pub fn mapped(&self, a: f64, b: f64) -> GaussRule {
        let h = 0.5 * (b - a);
        GaussRule {
            nodes: self.nodes.iter().map(|&x| a + h * (x + 1.0)).collect(),
            weights: self.weights.iter().map(|&w| w * h).collect(),
        }
    }
}

/// Rule for the weight `(1-x)^alpha (1+x)^beta` on `[-1, 1]`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(IflError::InvalidArgument("rule needs at least one node".into()));
    }
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(IflError::InvalidArgument(format!(
            "Jacobi exponents must exceed -1, got ({alpha}, {beta})"
        )));
    }
    let ab = alpha + beta;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        let diag = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        jac[(i, i)] = diag;
        if i + 1 < n {
            let k = k + 1.0;
            let s = 2.0 * k + ab;
            let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            let off = (num / den).sqrt();
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Rule for the weight `t^p (1-t)^q` on `[0, 1]`.
pub fn jacobi_unit(n: usize, p: f64, q: f64) -> Result<GaussRule> {
    let r = gauss_jacobi(n, q, p)?;
    let scale = 0.5f64.powf(p + q + 1.0);
    Ok(GaussRule {
        nodes: r.nodes.iter().map(|&x| 0.5 * (x + 1.0)).collect(),
        weights: r.weights.iter().map(|&w| w * scale).collect(),
    })
}

/// Values the adaptive integrator can accumulate.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    const ZERO: Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    const ZERO: Self = 0.0;
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights sit on the odd Kronrod nodes (indices 1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Integrand>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * KRONROD_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for i in 0..7 {
        let x = h * KRONROD_NODES[i];
        let s = f(c - x) + f(c + x);
        kron = kron + s * KRONROD_WEIGHTS[i];
        if i % 2 == 1 {
            gauss = gauss + s * GAUSS_WEIGHTS[i / 2];
        }
    }
    ((kron * h), ((kron - gauss) * h).magnitude())
}

/// Globally adaptive bisection until the summed error estimate is below
/// `tol` (absolute) or `max_intervals` is reached.
pub fn adaptive<T: Integrand>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<Quadrature<T>> {
    let (v, e) = gk15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        if total_err <= tol {
            break;
        }
        if pieces.len() >= max_intervals {
            return Err(IflError::Numerical(format!(
                "adaptive quadrature stalled at error {total_err:e} after {} intervals",
                pieces.len()
            )));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(IflError::Numerical("adaptive quadrature interval underflow".into()));
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evaluations += 30;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value = pieces.iter().fold(T::ZERO, |acc, p| acc + p.2);
    Ok(Quadrature {
        value,
        error: pieces.iter().map(|p| p.3).sum(),
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::function::beta::beta;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(5).unwrap();
        // degree 9 is the limit for five nodes
        assert_relative_eq!(r.integrate(|x| x.powi(8)), 2.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(r.integrate(|x| x.powi(9) + x.powi(2)), 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn three_point_legendre_nodes() {
        let r = gauss_legendre(3).unwrap();
        let s = (0.6f64).sqrt();
        assert_relative_eq!(r.nodes[0], -s, epsilon = 1e-14);
        assert_relative_eq!(r.nodes[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(r.weights[1], 8.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn unit_jacobi_reproduces_beta_moments() {
        let r = jacobi_unit(20, -1.0 / 3.0, 2.0 / 3.0).unwrap();
        for k in 0..6 {
            let exact = beta(k as f64 + 2.0 / 3.0, 5.0 / 3.0);
            assert_relative_eq!(r.integrate(|t| t.powi(k)), exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn kronrod_handles_complex_integrands() {
        let q = adaptive(|t: f64| Complex64::new(0.0, t).exp(), 0.0, std::f64::consts::PI, 1e-13, 50)
            .unwrap();
        assert!((q.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn adaptive_copes_with_endpoint_singularity() {
        let q = adaptive(|t: f64| t.powf(-0.5), 0.0, 1.0, 1e-10, 2000).unwrap();
        assert!((q.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_exponents_are_rejected() {
        assert!(gauss_jacobi(4, -1.0, 0.0).is_err());
        assert!(gauss_jacobi(0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn jacobi_weights_sum_to_the_weight_mass(a in -0.9f64..2.0, b in -0.9f64..2.0, n in 1usize..40) {
            let r = gauss_jacobi(n, a, b).unwrap();
            let mass = 2f64.powf(a + b + 1.0) * beta(a + 1.0, b + 1.0);
            prop_assert!((r.weights.iter().sum::<f64>() / mass - 1.0).abs() < 1e-12);
            prop_assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }
}
