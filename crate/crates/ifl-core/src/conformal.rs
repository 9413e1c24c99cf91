//! Conformal maps onto the upper half-plane: real Möbius automorphisms and
//! the elliptic map of a rectangle, with Jacobi functions computed by the
//! arithmetic-geometric mean.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::quadrature::adaptive;
use crate::{IflError, Result};

/// A conformal map together with its derivative and a branch of the square
/// root of the derivative that is continuous on the source domain.
pub trait ConformalMap {
    fn map(&self, z: Complex64) -> Complex64;
    fn derivative(&self, z: Complex64) -> Complex64;
    fn sqrt_derivative(&self, z: Complex64) -> Complex64 {
        self.derivative(z).sqrt()
    }
}

/// `z -> (a z + b) / (c z + d)` with real coefficients and `ad - bc > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mobius {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(IflError::InvalidArgument(format!(
                "Möbius map must preserve the half-plane, determinant {det}"
            )));
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn identity() -> Self {
        Mobius { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// `z -> -1/(z - p)`, sending `p` to infinity and infinity to 0.
    pub fn pole_at(p: f64) -> Self {
        Mobius { a: 0.0, b: -1.0, c: 1.0, d: -p }
    }

    pub fn affine(scale: f64, shift: f64) -> Result<Self> {
        Self::new(scale, shift, 0.0, 1.0)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Image of a real point, `None` at the pole.
    pub fn apply_real(&self, x: f64) -> Option<f64> {
        let den = self.c * x + self.d;
        (den != 0.0).then(|| (self.a * x + self.b) / den)
    }

    /// Image of the point at infinity, `None` if it stays there.
    pub fn image_of_infinity(&self) -> Option<f64> {
        (self.c != 0.0).then(|| self.a / self.c)
    }

    /// Real point sent to infinity, if any.
    pub fn pole(&self) -> Option<f64> {
        (self.c != 0.0).then(|| -self.d / self.c)
    }

    pub fn inverse(&self) -> Self {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Mobius) -> Self {
        Mobius {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
        }
    }
}

impl ConformalMap for Mobius {
    fn map(&self, z: Complex64) -> Complex64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    fn derivative(&self, z: Complex64) -> Complex64 {
        let den = z * self.c + self.d;
        self.det() / (den * den)
    }

    /// `sqrt(det) / (c z + d)`, analytic on the whole half-plane.
    fn sqrt_derivative(&self, z: Complex64) -> Complex64 {
        self.det().sqrt() / (z * self.c + self.d)
    }
}

/// `outer ∘ inner`.
#[derive(Clone, Debug)]
pub struct Composed<A, B> {
    pub inner: A,
    pub outer: B,
}

impl<A: ConformalMap, B: ConformalMap> ConformalMap for Composed<A, B> {
    fn map(&self, z: Complex64) -> Complex64 {
        self.outer.map(self.inner.map(z))
    }

    fn derivative(&self, z: Complex64) -> Complex64 {
        self.outer.derivative(self.inner.map(z)) * self.inner.derivative(z)
    }

    fn sqrt_derivative(&self, z: Complex64) -> Complex64 {
        self.outer.sqrt_derivative(self.inner.map(z)) * self.inner.sqrt_derivative(z)
    }
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind, parameter `m = k^2`.
pub fn ellip_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(IflError::InvalidArgument(format!("parameter {m} outside [0, 1)")));
    }
    Ok(PI / (2.0 * agm(1.0, (1.0 - m).sqrt())))
}

/// `K(m)` and `K(1 - m)` from both parameters, avoiding the cancellation
/// in `1 - m` when either is tiny.
pub fn ellip_k_pair(m: f64, mc: f64) -> (f64, f64) {
    (PI / (2.0 * agm(1.0, mc.sqrt())), PI / (2.0 * agm(1.0, m.sqrt())))
}

/// `(sn, cn, dn)` at real argument, parameter `m` in `[0, 1]`, by the
/// descending Landen (AGM) recursion.
pub fn sncndn(u: f64, m: f64) -> (f64, f64, f64) {
    if m == 1.0 {
        let c = 1.0 / u.cosh();
        return (u.tanh(), c, c);
    }
    let mut a = vec![1.0f64];
    let mut c = vec![m.sqrt()];
    let mut b = (1.0 - m).sqrt();
    while c.last().unwrap().abs() > 1e-17 && a.len() < 40 {
        let an = *a.last().unwrap();
        let next = 0.5 * (an + b);
        c.push(0.5 * (an - b));
        b = (an * b).sqrt();
        a.push(next);
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let (s, co) = phi.sin_cos();
    (s, co, (1.0 - m * s * s).max(0.0).sqrt())
}

/// `(sn, cn, dn)` at complex argument via the imaginary transformation and
/// the addition theorem.
pub fn sncndn_complex(u: Complex64, m: f64) -> (Complex64, Complex64, Complex64) {
    sncndn_complex_pair(u, m, 1.0 - m)
}

/// As [`sncndn_complex`] with the complementary parameter supplied exactly.
pub fn sncndn_complex_pair(u: Complex64, m: f64, mc: f64) -> (Complex64, Complex64, Complex64) {
    let (s, c, d) = sncndn(u.re, m);
    let (s1, c1, d1) = sncndn(u.im, mc);
    let den = c1 * c1 + m * s * s * s1 * s1;
    let sn = Complex64::new(s * d1, c * d * s1 * c1) / den;
    let cn = Complex64::new(c * c1, -s * d * s1 * d1) / den;
    let dn = Complex64::new(d * c1 * d1, -m * s * c * s1) / den;
    (sn, cn, dn)
}

/// Parameters `(m, 1 - m)` whose periods satisfy `K(1-m)/K(m) = ratio`,
/// from theta-function series in the nome.
pub fn parameter_for_period_ratio(ratio: f64) -> Result<(f64, f64)> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(IflError::InvalidArgument(format!("period ratio {ratio} must be positive")));
    }
    if ratio < 1.0 {
        let (m, mc) = parameter_for_period_ratio(1.0 / ratio)?;
        return Ok((mc, m));
    }
    let q = (-PI * ratio).exp();
    let mut t2 = 0.0;
    let mut t3 = 1.0;
    let mut t4 = 1.0;
    for n in 1..40 {
        let nf = n as f64;
        t2 += q.powf(nf * (nf - 1.0));
        let term = 2.0 * q.powf(nf * nf);
        t3 += term;
        t4 += if n % 2 == 1 { -term } else { term };
    }
    t2 *= 2.0 * q.powf(0.25);
    let k = (t2 / t3).powi(2);
    let kc = (t4 / t3).powi(2);
    Ok((k * k, kc * kc))
}

/// Map from the rectangle `[0, width] x [0, height]` onto the upper
/// half-plane: corners go to `-1, 1, 1/k, -1/k` counterclockwise from the
/// origin, and the midpoint of the top side goes to infinity.
#[derive(Clone, Debug)]
pub struct RectangleMap {
    pub width: f64,
    pub height: f64,
    pub m: f64,
    pub mc: f64,
    pub quarter_period: f64,
    pub complementary_period: f64,
}

impl RectangleMap {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(IflError::InvalidArgument("rectangle sides must be positive".into()));
        }
        let (m, mc) = parameter_for_period_ratio(2.0 * height / width)?;
        let (quarter_period, complementary_period) = ellip_k_pair(m, mc);
        Ok(RectangleMap {
            width,
            height,
            m,
            mc,
            quarter_period,
            complementary_period,
        })
    }

    fn scale(&self) -> f64 {
        2.0 * self.quarter_period / self.width
    }

    fn argument(&self, z: Complex64) -> Complex64 {
        z * self.scale() - self.quarter_period
    }

    pub fn modulus(&self) -> f64 {
        self.m.sqrt()
    }

    /// Preimage of a half-plane point by integrating the Schwarz–Christoffel
    /// density along the segment from 0; independent of the Jacobi functions.
    pub fn preimage_by_quadrature(&self, w: Complex64, tol: f64) -> Result<Complex64> {
        let m = self.m;
        let one = Complex64::new(1.0, 0.0);
        let integrand = |t: f64| {
            let x = w * t;
            w / ((one - x * x).sqrt() * (one - x * x * m).sqrt())
        };
        let q = adaptive(integrand, 0.0, 1.0, tol, 4000)?;
        Ok((q.value + self.quarter_period) / self.scale())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (0.0..=self.width).contains(&z.re) && (0.0..=self.height).contains(&z.im)
    }
}

impl ConformalMap for RectangleMap {
    fn map(&self, z: Complex64) -> Complex64 {
        sncndn_complex_pair(self.argument(z), self.m, self.mc).0
    }

    fn derivative(&self, z: Complex64) -> Complex64 {
        let (_, cn, dn) = sncndn_complex_pair(self.argument(z), self.m, self.mc);
        cn * dn * self.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn k_at_zero_and_known_value() {
        assert_relative_eq!(ellip_k(0.0).unwrap(), PI / 2.0, epsilon = 1e-15);
        // K(1/2) = Gamma(1/4)^2 / (4 sqrt(pi))
        assert_relative_eq!(ellip_k(0.5).unwrap(), 1.854_074_677_301_372, epsilon = 1e-14);
    }

    #[test]
    fn sn_reaches_one_at_quarter_period() {
        for m in [0.1, 0.5, 0.9, 0.999] {
            let k = ellip_k(m).unwrap();
            let (s, cn, dn) = sncndn(k, m);
            assert_relative_eq!(s, 1.0, epsilon = 1e-13);
            assert!(cn.abs() < 1e-7);
            assert_relative_eq!(dn, (1.0 - m).sqrt(), epsilon = 1e-12);
        }
        let (s, _, _) = sncndn(0.3, 0.0);
        assert_relative_eq!(s, 0.3f64.sin(), epsilon = 1e-15);
    }

    #[test]
    fn period_ratio_round_trips() {
        for r in [0.3, 1.0, 2.0, 5.0] {
            let (m, mc) = parameter_for_period_ratio(r).unwrap();
            assert_relative_eq!(m + mc, 1.0, epsilon = 1e-14);
            let (k, kp) = ellip_k_pair(m, mc);
            let got = kp / k;
            assert_relative_eq!(got, r, max_relative = 1e-12);
        }
    }

    #[test]
    fn rectangle_corners_and_top_midpoint() {
        let r = RectangleMap::new(1.5, 1.0).unwrap();
        let k = r.modulus();
        assert!((r.map(c(0.0, 0.0)) - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((r.map(c(1.5, 0.0)) - c(1.0, 0.0)).norm() < 1e-12);
        assert!((r.map(c(1.5, 1.0)) - c(1.0 / k, 0.0)).norm() < 1e-9);
        assert!((r.map(c(0.0, 1.0)) - c(-1.0 / k, 0.0)).norm() < 1e-9);
        assert!(r.map(c(0.75, 1.0 - 1e-9)).norm() > 1e6);
        assert!(r.map(c(0.3, 0.4)).im > 0.0);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let r = RectangleMap::new(2.0, 1.3).unwrap();
        let z = c(0.7, 0.4);
        let h = 1e-6;
        let fd = (r.map(z + h) - r.map(z - h)) / (2.0 * h);
        assert!((fd - r.derivative(z)).norm() < 1e-7 * fd.norm());
        let fdi = (r.map(z + c(0.0, h)) - r.map(z - c(0.0, h))) / c(0.0, 2.0 * h);
        assert!((fdi - r.derivative(z)).norm() < 1e-7 * fd.norm());
    }

    #[test]
    fn schwarz_christoffel_oracle_inverts_the_map() {
        let r = RectangleMap::new(1.0, 1.0).unwrap();
        for z in [c(0.5, 0.5), c(0.1, 0.2), c(0.9, 0.8), c(0.3, 0.95)] {
            let back = r.preimage_by_quadrature(r.map(z), 1e-13).unwrap();
            assert!((back - z).norm() < 1e-8, "{z} -> {back}");
        }
    }

    #[test]
    fn mobius_algebra() {
        let m = Mobius::new(2.0, 1.0, 1.0, 3.0).unwrap();
        let z = c(0.3, 1.1);
        assert!((m.inverse().map(m.map(z)) - z).norm() < 1e-14);
        let p = Mobius::pole_at(-2.0);
        assert!((p.compose(&m).map(z) - p.map(m.map(z))).norm() < 1e-14);
        assert_eq!(p.pole(), Some(-2.0));
        assert_eq!(p.image_of_infinity(), Some(0.0));
        let s = m.sqrt_derivative(z);
        assert!((s * s - m.derivative(z)).norm() < 1e-14);
        assert!(Mobius::new(1.0, 0.0, 0.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn complex_sn_satisfies_the_quadratic_identities(x in -2.0f64..2.0, y in -1.0f64..1.0, m in 0.01f64..0.99) {
            let (s, cn, dn) = sncndn_complex(c(x, y), m);
            prop_assert!((s * s + cn * cn - 1.0).norm() < 1e-11 * (1.0 + s.norm_sqr()));
            prop_assert!((dn * dn + s * s * m - 1.0).norm() < 1e-11 * (1.0 + s.norm_sqr()));
        }

        #[test]
        fn composed_root_is_a_root(x in -3.0f64..3.0, y in 0.1f64..3.0) {
            let map = Composed { inner: Mobius::pole_at(-5.0), outer: Mobius::new(1.0, 2.0, -0.5, 1.0).unwrap() };
            let z = c(x, y);
            let s = map.sqrt_derivative(z);
            prop_assert!((s * s - map.derivative(z)).norm() < 1e-12 * map.derivative(z).norm());
        }
    }
}
