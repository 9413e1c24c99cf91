//! The continuum observable in the upper half-plane: a real polynomial over
//! square-root branch factors and simple poles, fixed by a small linear
//! system, together with its residue, the interface drift, the coefficients
//! at free-arc endpoints and the integrated function `h = Im ∫ f²`.

pub mod closed_form;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{ConformalMap, Mobius};
use crate::quadrature::adaptive;
use crate::{IflError, Result};

pub use closed_form::{
    chi, closed_form_m0, closed_form_m1, drift_five_point, drift_pmpf, drift_three_point, psi,
    residue_closed_form,
};

/// Marked boundary points in the half-plane. `b` lists free-arc endpoints in
/// increasing order; when `last_at_infinity` is set the final endpoint is
/// the point at infinity and is omitted from `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumBC {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub zeta: Vec<i8>,
    #[serde(default)]
    pub last_at_infinity: bool,
}

impl ContinuumBC {
    pub fn new(a: Vec<f64>, b: Vec<f64>, zeta: Vec<i8>) -> Result<Self> {
        let bc = ContinuumBC { a, b, zeta, last_at_infinity: false };
        bc.validate()?;
        Ok(bc)
    }

    /// Same as [`ContinuumBC::new`] with `b_{2k} = ∞`; `b` holds the `2k-1`
    /// finite endpoints.
    pub fn with_infinite_end(a: Vec<f64>, b: Vec<f64>, zeta: Vec<i8>) -> Result<Self> {
        let bc = ContinuumBC { a, b, zeta, last_at_infinity: true };
        bc.validate()?;
        Ok(bc)
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn k(&self) -> usize {
        (self.b.len() + usize::from(self.last_at_infinity)) / 2
    }

    /// Sign of the last arc forced by the parity of sign changes.
    pub fn closing_zeta(&self) -> i8 {
        let prod: i8 = self.zeta.iter().product();
        let parity = if self.m() % 2 == 0 { 1 } else { -1 };
        -prod * parity
    }

    pub fn validate(&self) -> Result<()> {
        let nb = self.b.len() + usize::from(self.last_at_infinity);
        if nb == 0 || nb % 2 != 0 {
            return Err(IflError::InvalidBc(format!(
                "need an even, positive number of free-arc endpoints, got {nb}"
            )));
        }
        let k = nb / 2;
        if self.zeta.len() != k - 1 {
            return Err(IflError::InvalidBc(format!(
                "expected {} arc signs, got {}",
                k - 1,
                self.zeta.len()
            )));
        }
        if self.zeta.iter().any(|&z| z != 1 && z != -1) {
            return Err(IflError::InvalidBc("arc signs must be +1 or -1".into()));
        }
        let all: Vec<f64> = self.a.iter().chain(&self.b).copied().collect();
        if all.iter().any(|v| !v.is_finite()) {
            return Err(IflError::InvalidBc("marked points must be finite".into()));
        }
        if self.b.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(IflError::InvalidBc("free-arc endpoints must increase".into()));
        }
        for (i, x) in all.iter().enumerate() {
            if all[..i].contains(x) {
                return Err(IflError::InvalidBc(format!("marked point {x} repeated")));
            }
        }
        for &x in &self.a {
            for j in 0..k {
                let lo = self.b[2 * j];
                let inside = match self.b.get(2 * j + 1) {
                    Some(&hi) => lo <= x && x <= hi,
                    None => x >= lo,
                };
                if inside {
                    return Err(IflError::InvalidBc(format!(
                        "sign change {x} lies on free arc {}",
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    fn apply(&self, mobius: &Mobius) -> Result<ContinuumBC> {
        let img = |x: f64| {
            mobius
                .apply_real(x)
                .ok_or_else(|| IflError::Numerical(format!("chart pole hits marked point {x}")))
        };
        let mut b: Vec<f64> = self.b.iter().map(|&x| img(x)).collect::<Result<_>>()?;
        if self.last_at_infinity {
            b.push(mobius.image_of_infinity().ok_or_else(|| {
                IflError::Numerical("chart keeps the point at infinity".into())
            })?);
        }
        ContinuumBC::new(
            self.a.iter().map(|&x| img(x)).collect::<Result<_>>()?,
            b,
            self.zeta.clone(),
        )
    }
}

/// Solution of the boundary value problem. `P` is stored in the Lagrange-type
/// basis `prod_{j != l} (z - t_j)` over `nodes = (a_1..a_m, b_1, b_3, ..)`,
/// in the finite chart.
#[derive(Clone, Debug)]
pub struct ContinuumObservable {
    pub bc: ContinuumBC,
    /// Marked points after the chart change (equal to `bc` when finite).
    pub chart_bc: ContinuumBC,
    pub chart: Mobius,
    pub nodes: Vec<f64>,
    pub poly_coeffs: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

fn basis_nodes(bc: &ContinuumBC) -> Vec<f64> {
    bc.a.iter().copied().chain(bc.b.iter().step_by(2).copied()).collect()
}

/// `prod_{j != l}(x - t_j)` and its derivative.
fn basis_value(nodes: &[f64], l: usize, x: f64) -> (f64, f64) {
    let mut v = 1.0;
    let mut d = 0.0;
    for (j, &t) in nodes.iter().enumerate() {
        if j == l {
            continue;
        }
        d = d * (x - t) + v;
        v *= x - t;
    }
    (v, d)
}

/// Branch factor `sqrt(z - lo) sqrt(z - hi)` at a real point off the arc:
/// positive to the right of the arc and negative to its left.
fn real_branch(lo: f64, hi: f64, x: f64) -> f64 {
    let r = ((x - lo) * (x - hi)).sqrt();
    if x > hi {
        r
    } else {
        -r
    }
}

/// Denominator of `f` with the branch factor of arc `skip` and the pole
/// at `a_{skip_pole}` removed, at a real point.
fn reduced_denominator(bc: &ContinuumBC, x: f64, skip_arc: Option<usize>, skip_pole: Option<usize>) -> f64 {
    let mut d = 1.0;
    for j in 0..bc.k() {
        if Some(j) != skip_arc {
            d *= real_branch(bc.b[2 * j], bc.b[2 * j + 1], x);
        }
    }
    for (i, &a) in bc.a.iter().enumerate() {
        if Some(i) != skip_pole {
            d *= x - a;
        }
    }
    d
}

/// Solves the finite-chart system: vanishing regular part at every `a_i`,
/// the end-coefficient ratios `-ζ_i` on the first `k-1` arcs and the
/// normalization at the last endpoint.
fn solve_finite(bc: &ContinuumBC) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let nodes = basis_nodes(bc);
    let n = nodes.len();
    let k = bc.k();
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut row = 0;
    for (i, &x) in bc.a.iter().enumerate() {
        let mut log_der = 0.0;
        for j in 0..k {
            log_der += 0.5 / (x - bc.b[2 * j]) + 0.5 / (x - bc.b[2 * j + 1]);
        }
        for (l, &a) in bc.a.iter().enumerate() {
            if l != i {
                log_der += 1.0 / (x - a);
            }
        }
        for l in 0..n {
            let (v, d) = basis_value(&nodes, l, x);
            mat[(row, l)] = d - v * log_der;
        }
        row += 1;
    }
    for j in 0..k - 1 {
        let (lo, hi) = (bc.b[2 * j], bc.b[2 * j + 1]);
        let dhi = reduced_denominator(bc, hi, Some(j), None);
        let dlo = reduced_denominator(bc, lo, Some(j), None);
        let zeta = f64::from(bc.zeta[j]);
        for l in 0..n {
            mat[(row, l)] = basis_value(&nodes, l, hi).0 / dhi + zeta * basis_value(&nodes, l, lo).0 / dlo;
        }
        row += 1;
    }
    let (lo, hi) = (bc.b[2 * k - 2], bc.b[2 * k - 1]);
    let scale = PI.sqrt() / ((hi - lo).sqrt() * reduced_denominator(bc, hi, Some(k - 1), None));
    for l in 0..n {
        mat[(row, l)] = scale * basis_value(&nodes, l, hi).0;
    }
    rhs[row] = 1.0;

    let sv = mat.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e13) {
        return Err(IflError::Numerical(format!(
            "observable system is singular (condition number {condition:e})"
        )));
    }
    let sol = mat
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| IflError::Numerical("observable system is singular".into()))?;
    let residual = (&mat * &sol - &rhs).amax();
    Ok((nodes, sol.iter().copied().collect(), residual, condition))
}

/// Chart sending infinity to a finite point: a pole placed on the fixed arc
/// to the left of every marked point, which keeps the order of all points.
fn chart_for(bc: &ContinuumBC) -> Mobius {
    if !bc.last_at_infinity {
        return Mobius::identity();
    }
    let pts: Vec<f64> = bc.a.iter().chain(&bc.b).copied().collect();
    let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo).max(1.0);
    // an irrational offset keeps the pole away from round evaluation points
    Mobius::pole_at(lo - 1.618_033_988_749_895 * spread)
}

pub fn solve_observable(bc: &ContinuumBC) -> Result<ContinuumObservable> {
    bc.validate()?;
    let chart = chart_for(bc);
    let chart_bc = if bc.last_at_infinity { bc.apply(&chart)? } else { bc.clone() };
    let (nodes, poly_coeffs, residual, condition) = solve_finite(&chart_bc)?;
    let mut obs = ContinuumObservable {
        bc: bc.clone(),
        chart_bc,
        chart,
        nodes,
        poly_coeffs,
        residual,
        condition,
    };
    if bc.last_at_infinity {
        // The arc to infinity closes up on the far left, so f is taken
        // positive there as it is to the right of a bounded last arc.
        let pole = Complex64::new(obs.chart.pole().unwrap_or(0.0), 0.0);
        if obs.eval(pole)?.re < 0.0 {
            obs.poly_coeffs.iter_mut().for_each(|c| *c = -*c);
        }
    }
    Ok(obs)
}

fn positive_zero(z: Complex64) -> Complex64 {
    Complex64::new(z.re, if z.im == 0.0 { 0.0 } else { z.im })
}

impl ContinuumObservable {
    pub fn k(&self) -> usize {
        self.bc.k()
    }

    pub fn m(&self) -> usize {
        self.bc.m()
    }

    fn poly(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, &c) in self.poly_coeffs.iter().enumerate() {
            let mut v = Complex64::new(c, 0.0);
            for (j, &t) in self.nodes.iter().enumerate() {
                if j != l {
                    v *= z - t;
                }
            }
            acc += v;
        }
        acc
    }

    /// Value in the finite chart, boundary values taken from above.
    fn eval_chart(&self, w: Complex64) -> Result<Complex64> {
        let w = positive_zero(w);
        let bc = &self.chart_bc;
        if w.im < 0.0 {
            return Err(IflError::InvalidArgument(format!("{w} is below the real axis")));
        }
        let mut den = Complex64::new(1.0, 0.0);
        for j in 0..bc.k() {
            den *= (w - bc.b[2 * j]).sqrt() * (w - bc.b[2 * j + 1]).sqrt();
        }
        for &a in &bc.a {
            den *= w - a;
        }
        if den == Complex64::new(0.0, 0.0) {
            return Err(IflError::InvalidArgument(format!("{w} is a marked point")));
        }
        Ok(self.poly(w) / den)
    }

    /// `f_{H,B}(z)` for `z` in the closed upper half-plane.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if !z.is_finite() {
            return Err(IflError::InvalidArgument("evaluation point must be finite".into()));
        }
        let c = &self.chart;
        let den = c.c * z + c.d;
        if den.norm() > 1e-300 {
            let w = c.map(positive_zero(z));
            return Ok(c.sqrt_derivative(z) * self.eval_chart(w)?);
        }
        // z is the chart pole: f_chart(w) ~ lead(P) / w at infinity
        let lead = self.monomial_coeffs().last().copied().unwrap_or(0.0);
        Ok(c.det().sqrt() * lead / (c.a * z + c.b))
    }

    /// Residue at `a_i` (real).
    pub fn residue(&self, i: usize) -> Result<f64> {
        let bc = &self.chart_bc;
        let x = *bc
            .a
            .get(i)
            .ok_or_else(|| IflError::InvalidArgument(format!("no sign change {i}")))?;
        let p = self.poly(Complex64::new(x, 0.0)).re;
        let r_chart = p / reduced_denominator(bc, x, None, Some(i));
        // f(z) = sqrt(det)/(cz + d) f_chart(ψ z) and ψ'(a) = det/(ca + d)^2
        let a = self.bc.a[i];
        let c = &self.chart;
        Ok(r_chart * (c.c * a + c.d) / c.det().sqrt())
    }

    /// `lim |sqrt(π (z - b_j)) f(z)|` at endpoint `j` (0-based, among all
    /// `2k` endpoints). The modulus is chart-independent.
    pub fn boundary_coefficient(&self, j: usize) -> Result<f64> {
        let bc = &self.chart_bc;
        let x = *bc
            .b
            .get(j)
            .ok_or_else(|| IflError::InvalidArgument(format!("no free-arc endpoint {j}")))?;
        let arc = j / 2;
        let partner = bc.b[j ^ 1];
        let p = self.poly(Complex64::new(x, 0.0)).re;
        let den = (x - partner).abs().sqrt() * reduced_denominator(bc, x, Some(arc), None);
        Ok((PI.sqrt() * p / den).abs())
    }

    /// Signed end coefficient `lim sqrt((z-b_{2i-1})(z-b_{2i})) f(z)` at
    /// endpoint `j`, in the finite chart.
    pub fn end_coefficient(&self, j: usize) -> Result<f64> {
        let bc = &self.chart_bc;
        let x = *bc
            .b
            .get(j)
            .ok_or_else(|| IflError::InvalidArgument(format!("no free-arc endpoint {j}")))?;
        Ok(self.poly(Complex64::new(x, 0.0)).re / reduced_denominator(bc, x, Some(j / 2), None))
    }

    /// Coefficients of `P` in the monomial basis (finite chart), lowest first.
    pub fn monomial_coeffs(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut out = vec![0.0; n];
        for (l, &c) in self.poly_coeffs.iter().enumerate() {
            let mut p = vec![1.0];
            for (j, &t) in self.nodes.iter().enumerate() {
                if j == l {
                    continue;
                }
                let mut q = vec![0.0; p.len() + 1];
                for (i, &v) in p.iter().enumerate() {
                    q[i + 1] += v;
                    q[i] -= t * v;
                }
                p = q;
            }
            for (i, v) in p.into_iter().enumerate() {
                out[i] += c * v;
            }
        }
        out
    }

    /// `h(w) = Im ∫_∞^w f(z)^2 dz`, integrated along the vertical ray above
    /// `w`; it vanishes on the fixed arcs and at infinity.
    pub fn h(&self, w: Complex64) -> Result<f64> {
        let w = self.chart.map(positive_zero(w));
        let integrand = |t: f64| {
            let s = 1.0 - t;
            let z = w + Complex64::new(0.0, t / s);
            let f = self.eval_chart(z).unwrap_or(Complex64::new(f64::NAN, 0.0));
            f * f * Complex64::new(0.0, 1.0 / (s * s))
        };
        let scale = self.scale_hint();
        let q = adaptive(integrand, 0.0, 1.0, 1e-12 / scale, 20_000)?;
        if !q.value.is_finite() {
            return Err(IflError::Numerical(format!("h integrand blew up near {w}")));
        }
        Ok(-q.value.im)
    }

    fn scale_hint(&self) -> f64 {
        let pts: Vec<f64> = self.chart_bc.a.iter().chain(&self.chart_bc.b).copied().collect();
        let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo).max(1e-300)
    }

    /// Covariant value `(φ')^{1/2} f_{H,φ(B)}(φ(z))` for a map `φ: Ω -> H`
    /// under which this observable's marked points are the images.
    pub fn transport(&self, map: &impl ConformalMap, z: Complex64) -> Result<Complex64> {
        Ok(map.sqrt_derivative(z) * self.eval(map.map(z))?)
    }
}

/// `R(B)`: residue at `a_1` of the normalized observable.
pub fn residue_r(bc: &ContinuumBC) -> Result<f64> {
    if bc.m() == 0 {
        return Err(IflError::InvalidBc("residue needs a sign change".into()));
    }
    solve_observable(bc)?.residue(0)
}

/// `D = -3 ∂_{a_1} log R`, by central differences on `log|R|` with one
/// Richardson step.
pub fn drift(bc: &ContinuumBC) -> Result<f64> {
    if bc.m() == 0 {
        return Err(IflError::InvalidBc("drift needs a sign change".into()));
    }
    let a1 = bc.a[0];
    let gap = bc
        .a
        .iter()
        .skip(1)
        .chain(&bc.b)
        .map(|&x| (x - a1).abs())
        .fold(f64::INFINITY, f64::min);
    if !(gap > 1e-12) {
        return Err(IflError::Numerical("a_1 collides with a marked point".into()));
    }
    let h = 1e-5 * gap;
    let log_r = |shift: f64| -> Result<f64> {
        let mut moved = bc.clone();
        moved.a[0] = a1 + shift;
        let r = residue_r(&moved)?;
        if r == 0.0 {
            return Err(IflError::Numerical("vanishing residue".into()));
        }
        Ok(r.abs().ln())
    };
    let central = |h: f64| -> Result<f64> { Ok(-3.0 * (log_r(h)? - log_r(-h)?) / (2.0 * h)) };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
