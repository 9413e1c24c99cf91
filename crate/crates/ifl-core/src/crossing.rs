//! Scaling limits of FK-Ising multi-arc crossing probabilities, assembled
//! from jumps of continuum observables, and the spin-crossing functions `G`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{ConformalMap, Mobius};
use crate::cont_obs::{solve_observable, ContinuumBC};
use crate::lowtemp::{check_subset, sigma_from_bits, spin_correlation_from_sums};
use crate::quadrature::{adaptive, jacobi_unit, GaussRule};
use crate::{IflError, Result};

/// Half-plane images `x_1 < … < x_{2k}`; arcs `[x_{2i-1}, x_{2i}]` are wired
/// and the arcs between them (including the one through infinity) free.
/// `subset` holds 0-based wired-arc indices; the first one is pinned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingQuery {
    pub points: Vec<f64>,
    pub subset: Vec<usize>,
}

impl CrossingQuery {
    pub fn new(points: Vec<f64>, subset: Vec<usize>) -> Result<Self> {
        let q = CrossingQuery { points, subset };
        q.validate()?;
        Ok(q)
    }

    pub fn k(&self) -> usize {
        self.points.len() / 2
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if n < 2 || n % 2 == 1 {
            return Err(IflError::InvalidArgument(format!(
                "need an even, positive number of points, got {n}"
            )));
        }
        if self.points.iter().any(|x| !x.is_finite())
            || self.points.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(IflError::InvalidArgument(
                "points must be finite and strictly increasing".into(),
            ));
        }
        check_subset(self.k(), &self.subset)
    }

    /// The same query after a real Möbius map that keeps the cyclic order.
    /// The points are relabelled so they increase again.
    pub fn mapped(&self, m: &Mobius) -> Result<Self> {
        let img = self
            .points
            .iter()
            .map(|&x| m.apply_real(x).ok_or_else(|| IflError::InvalidArgument(format!("{x} maps to infinity"))))
            .collect::<Result<Vec<_>>>()?;
        // the images are a rotation of an increasing sequence
        let start = (0..img.len())
            .find(|&i| (1..img.len()).all(|j| img[(i + j - 1) % img.len()] < img[(i + j) % img.len()]))
            .ok_or_else(|| IflError::InvalidArgument("map does not preserve the cyclic order".into()))?;
        if start % 2 == 1 {
            return Err(IflError::InvalidArgument(
                "map sends infinity into a wired arc".into(),
            ));
        }
        let k = self.k();
        let shift = start / 2;
        Ok(CrossingQuery {
            points: (0..img.len()).map(|j| img[(start + j) % img.len()]).collect(),
            subset: self.subset.iter().map(|&i| (i + k - shift) % k).collect(),
        })
    }
}

/// One prefix flip: `Z_{σ'}/Z_σ` where `σ'` flips `σ_1..σ_{i+1}` (0-based `i`).
#[derive(Clone, Debug, Serialize)]
pub struct FlipStep {
    pub sigma: Vec<i8>,
    pub prefix: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FkCrossing {
    pub value: f64,
    /// `Z_σ / Z_{+…+}` for each `σ`, bit `i` set meaning `σ_i = -1`.
    pub ratios: Vec<f64>,
    pub steps: Vec<FlipStep>,
}

/// Marked points `b = (x_2, …, x_{2k}, x_1)` made increasing by sending a
/// point of the wired arc `(x_1, x_2)` to infinity.
fn cyclic_marks(points: &[f64]) -> Result<Vec<f64>> {
    let p = 0.5 * (points[0] + points[1]);
    let m = Mobius::pole_at(p);
    let mut b: Vec<f64> = points[1..]
        .iter()
        .chain(std::iter::once(&points[0]))
        .map(|&x| m.apply_real(x).expect("finite away from the pole"))
        .collect();
    // rescale to unit spread for conditioning
    let (lo, hi) = (b[0], b[b.len() - 1]);
    b.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
    Ok(b)
}

/// `Z_{σ'}/Z_σ` with `σ'` flipping the first `prefix + 1` arc spins.
pub fn flip_ratio(points: &[f64], sigma: &[i8], prefix: usize) -> Result<f64> {
    let k = sigma.len();
    if prefix + 1 >= k {
        return Err(IflError::InvalidArgument(format!(
            "prefix {prefix} must leave the last arc unflipped (k = {k})"
        )));
    }
    let b = cyclic_marks(points)?;
    let zeta: Vec<i8> = (0..k - 1)
        .map(|i| if sigma[i] == sigma[i + 1] { 1 } else { -1 })
        .collect();
    let obs = solve_observable(&ContinuumBC::new(vec![], b, zeta)?)?;
    obs.boundary_coefficient(2 * prefix + 1)
}

/// `Z_to / Z_from` as a product of prefix flips.
pub fn z_ratio(points: &[f64], from: &[i8], to: &[i8], steps: &mut Vec<FlipStep>) -> Result<f64> {
    let k = from.len();
    if to.len() != k || points.len() != 2 * k {
        return Err(IflError::InvalidArgument("spin vectors must have one entry per arc".into()));
    }
    // Z is even under a global flip
    let target: Vec<i8> = if to[k - 1] == from[k - 1] {
        to.to_vec()
    } else {
        to.iter().map(|s| -s).collect()
    };
    let mut cur = from.to_vec();
    let mut ratio = 1.0;
    for i in (0..k.saturating_sub(1)).rev() {
        if cur[i] != target[i] {
            let r = flip_ratio(points, &cur, i)?;
            steps.push(FlipStep {
                sigma: cur.clone(),
                prefix: i,
                ratio: r,
            });
            ratio *= r;
            cur[..=i].iter_mut().for_each(|s| *s = -*s);
        }
    }
    Ok(ratio)
}

/// Scaling limit of the spin correlation of the wired arcs in the query
/// (for two arcs, the probability that they are in one cluster).
pub fn fk_crossing_continuum(q: &CrossingQuery) -> Result<FkCrossing> {
    q.validate()?;
    let k = q.k();
    let plus = vec![1i8; k];
    let mut steps = Vec::new();
    let ratios = (0..1usize << k)
        .map(|bits| z_ratio(&q.points, &plus, &sigma_from_bits(bits, k), &mut steps))
        .collect::<Result<Vec<_>>>()?;
    let value = spin_correlation_from_sums(&ratios, k, &q.subset)?;
    Ok(FkCrossing { value, ratios, steps })
}

/// Cross-ratio `(a1-a2)(b1-b2)/((b1-a2)(a1-b2))`, which is
/// `(a1-a2)/(b1-a2)` when `b2 = ∞`.
pub fn lambda(a1: f64, b1: f64, b2: f64, a2: f64) -> f64 {
    if b2.is_infinite() {
        return (a1 - a2) / (b1 - a2);
    }
    (a1 - a2) * (b1 - b2) / ((b1 - a2) * (a1 - b2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GKind {
    /// `+/-/+/free`
    Pmpf,
    /// `+/-/+/-`
    Pmpm,
    /// `+/-/free/free`
    Pmff,
}

impl std::str::FromStr for GKind {
    type Err = IflError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pmpf" => Ok(GKind::Pmpf),
            "pmpm" => Ok(GKind::Pmpm),
            "pmff" => Ok(GKind::Pmff),
            _ => Err(IflError::InvalidArgument(format!("unknown G kind {s:?}"))),
        }
    }
}

impl GKind {
    /// Integrand `s^p (1-s)^q g(s)` as `(p, q, g)`.
    fn parts(self) -> (f64, f64, fn(f64) -> f64) {
        match self {
            GKind::Pmpf => (2.0 / 3.0, -1.0 / 3.0, |s| 1.0 / ((2.0 - s) * (2.0 - s))),
            GKind::Pmpm => (2.0 / 3.0, 2.0 / 3.0, |s| 1.0 / (1.0 - s + s * s)),
            GKind::Pmff => (-1.0 / 3.0, -1.0 / 3.0, |_| 1.0),
        }
    }

    pub fn density(self, s: f64) -> f64 {
        self.density_split(s, 1.0 - s)
    }

    /// Density from `s` and `1 - s` supplied separately, so either end can
    /// be approached without cancellation.
    fn density_split(self, s: f64, rest: f64) -> f64 {
        let (p, q, g) = self.parts();
        s.powf(p) * rest.powf(q) * g(s)
    }
}

pub const DEFAULT_G_NODES: usize = 64;

/// Normalized crossing function `G(λ) = ∫_0^λ w / ∫_0^1 w`.
#[derive(Clone, Debug)]
pub struct GFunction {
    pub kind: GKind,
    pub normalization: f64,
    left: GaussRule,
    right: GaussRule,
}

impl GFunction {
    pub fn new(kind: GKind) -> Result<Self> {
        Self::with_nodes(kind, DEFAULT_G_NODES)
    }

    pub fn with_nodes(kind: GKind, n: usize) -> Result<Self> {
        let (p, q, g) = kind.parts();
        let normalization = jacobi_unit(n, p, q)?.integrate(g);
        Ok(GFunction {
            kind,
            normalization,
            left: jacobi_unit(n, p, 0.0)?,
            right: jacobi_unit(n, q, 0.0)?,
        })
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let (p, q, g) = self.kind.parts();
        if lambda <= 0.5 {
            // s = λt keeps the (1-s)^q factor smooth
            let body = self.left.integrate(|t| (1.0 - lambda * t).powf(q) * g(lambda * t));
            Ok(lambda.powf(p + 1.0) * body / self.normalization)
        } else {
            let mu = 1.0 - lambda;
            let body = self.right.integrate(|u| (1.0 - mu * u).powf(p) * g(1.0 - mu * u));
            Ok(1.0 - mu.powf(q + 1.0) * body / self.normalization)
        }
    }

    /// Independent evaluation by adaptive Gauss–Kronrod after the cubic
    /// substitutions `s = u^3` and `1 - s = v^3` at the two ends.
    pub fn eval_adaptive(&self, lambda: f64, tol: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let kind = self.kind;
        let near_zero = |u: f64| 3.0 * u * u * kind.density_split(u * u * u, 1.0 - u * u * u);
        let near_one = |v: f64| 3.0 * v * v * kind.density_split(1.0 - v * v * v, v * v * v);
        let half = 0.5f64.cbrt();
        let lower = adaptive(near_zero, 0.0, half, tol, 4000)?.value;
        let upper = adaptive(near_one, 0.0, half, tol, 4000)?.value;
        let total = lower + upper;
        let partial = if lambda == 0.0 {
            0.0
        } else if lambda <= 0.5 {
            adaptive(near_zero, 0.0, lambda.cbrt(), tol, 4000)?.value
        } else if lambda == 1.0 {
            total
        } else {
            total - adaptive(near_one, 0.0, (1.0 - lambda).cbrt(), tol, 4000)?.value
        };
        Ok(partial / total)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(IflError::InvalidArgument(format!("λ = {lambda} outside [0, 1]")))
    }
}

/// Boundary image under `map`; points sent beyond `1e15` count as infinity.
fn boundary_image(map: &impl ConformalMap, z: Complex64) -> f64 {
    let w = map.map(z);
    if !w.re.is_finite() || w.norm() > 1e15 {
        f64::INFINITY
    } else {
        w.re
    }
}

/// `(P(+ crossing), P(- crossing)) = (1 - G(λ), G(λ))` for `+/-/+/free`
/// boundary conditions: `+` on `(a1 b1)` and `(b2 a2)`, free on `(b1 b2)`,
/// `-` on `(a2 a1)`, points listed counterclockwise.
pub fn spin_crossing_prediction(
    map: &impl ConformalMap,
    a1: Complex64,
    b1: Complex64,
    b2: Complex64,
    a2: Complex64,
    g: &GFunction,
) -> Result<(f64, f64)> {
    let [x1, y1, y2, x2] = [a1, b1, b2, a2].map(|z| boundary_image(map, z));
    if x1.is_infinite() || y1.is_infinite() || x2.is_infinite() {
        return Err(IflError::InvalidArgument(
            "only b2 may be sent to infinity".into(),
        ));
    }
    let l = lambda(x1, y1, y2, x2);
    if !(l > 0.0 && l < 1.0) {
        return Err(IflError::InvalidArgument(format!(
            "marked points are not in counterclockwise order a1, b1, b2, a2 (λ = {l})"
        )));
    }
    let minus = g.eval(l)?;
    Ok((1.0 - minus, minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_wired_arc_is_connected() {
        let q = CrossingQuery::new(vec![-0.3, 2.0], vec![0]).unwrap();
        assert_abs_diff_eq!(fk_crossing_continuum(&q).unwrap().value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_points_are_reflection_invariant() {
        let q = CrossingQuery::new(vec![-3.0, -1.0, 1.0, 3.0], vec![0, 1]).unwrap();
        let v = fk_crossing_continuum(&q).unwrap().value;
        let r = CrossingQuery::new(vec![-3.0, -1.0, 1.0, 3.0], vec![1, 0]).unwrap();
        assert_abs_diff_eq!(v, fk_crossing_continuum(&r).unwrap().value, epsilon = 1e-12);
        let shifted = CrossingQuery::new(vec![-3.0, -1.5, 1.0, 3.0], vec![0, 1]).unwrap();
        let mirrored = CrossingQuery::new(vec![-3.0, -1.0, 1.5, 3.0], vec![0, 1]).unwrap();
        assert_abs_diff_eq!(
            fk_crossing_continuum(&shifted).unwrap().value,
            fk_crossing_continuum(&mirrored).unwrap().value,
            epsilon = 1e-12
        );
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn conformal_square_value_follows_from_duality() {
        // On a square, duality exchanges "left and right wired separately"
        // with the rotated model where the two arcs are wired together.
        // Joining the arcs reweights the disconnected event by 1/2, so
        // p = 1 - 2p/(1 + p), i.e. p = sqrt 2 - 1.
        let rect = crate::conformal::RectangleMap::new(1.0, 1.0).unwrap();
        let k = rect.modulus();
        let q = CrossingQuery::new(vec![-1.0 / k, -1.0, 1.0, 1.0 / k], vec![0, 1]).unwrap();
        assert_abs_diff_eq!(fk_crossing_continuum(&q).unwrap().value, 2f64.sqrt() - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ratio_telescoping_is_path_independent() {
        let pts = [-2.0, -1.2, -0.1, 0.4, 1.3, 2.5];
        let plus = [1i8, 1, 1];
        let mid = [-1i8, -1, 1];
        let target = [1i8, -1, 1];
        let mut log = Vec::new();
        let direct = z_ratio(&pts, &plus, &target, &mut log).unwrap();
        let via = z_ratio(&pts, &plus, &mid, &mut log).unwrap() * z_ratio(&pts, &mid, &target, &mut log).unwrap();
        assert_abs_diff_eq!(direct, via, epsilon = 1e-10 * direct);
        // and the inverse step undoes the forward one
        let back = z_ratio(&pts, &target, &plus, &mut log).unwrap();
        assert_abs_diff_eq!(direct * back, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn g_normalization_and_symmetry() {
        for kind in [GKind::Pmpf, GKind::Pmpm, GKind::Pmff] {
            let g = GFunction::new(kind).unwrap();
            assert_abs_diff_eq!(g.eval(0.0).unwrap(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(g.eval(1.0).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(GFunction::new(GKind::Pmpm).unwrap().eval(0.5).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(GFunction::new(GKind::Pmff).unwrap().eval(0.5).unwrap(), 0.5, epsilon = 1e-12);
        assert!(GFunction::new(GKind::Pmpf).unwrap().eval(1.2).is_err());
    }

    #[test]
    fn pmff_is_an_incomplete_beta_ratio() {
        // ∫_0^λ s^{-1/3}(1-s)^{-1/3} ds / B(2/3, 2/3)
        let g = GFunction::new(GKind::Pmff).unwrap();
        for l in [0.1, 0.37, 0.8] {
            let exact = statrs::function::beta::beta_reg(2.0 / 3.0, 2.0 / 3.0, l);
            assert_abs_diff_eq!(g.eval(l).unwrap(), exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn jacobi_and_adaptive_quadratures_agree() {
        for kind in [GKind::Pmpf, GKind::Pmpm, GKind::Pmff] {
            let g = GFunction::new(kind).unwrap();
            for l in [0.0, 0.05, 0.3, 0.5, 0.71, 0.97, 1.0] {
                let a = g.eval(l).unwrap();
                let b = g.eval_adaptive(l, 1e-13).unwrap();
                assert!((a - b).abs() < 1e-10, "{kind:?} {l}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn g_is_monotone() {
        for kind in [GKind::Pmpf, GKind::Pmpm, GKind::Pmff] {
            let g = GFunction::new(kind).unwrap();
            let vals: Vec<f64> = (0..=1000).map(|i| g.eval(i as f64 / 1000.0).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{kind:?}");
        }
    }

    #[test]
    fn prediction_limits_and_ordering() {
        let g = GFunction::new(GKind::Pmpf).unwrap();
        let id = Mobius::identity();
        let c = |x: f64| Complex64::new(x, 0.0);
        let (plus, minus) = spin_crossing_prediction(&id, c(0.0), c(1.0), c(1e17), c(-1.0), &g).unwrap();
        assert_abs_diff_eq!(plus + minus, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(minus, g.eval(0.5).unwrap(), epsilon = 1e-15);
        let (p, _) = spin_crossing_prediction(&id, c(-0.999_999), c(1.0), c(1e17), c(-1.0), &g).unwrap();
        assert!(p > 0.999);
        let (_, m) = spin_crossing_prediction(&id, c(0.999_999), c(1.0), c(1e17), c(-1.0), &g).unwrap();
        assert!(m > 0.999);
        assert!(spin_crossing_prediction(&id, c(2.0), c(1.0), c(1e17), c(-1.0), &g).is_err());
        // all four finite: the cross-ratio form
        let (q, _) = spin_crossing_prediction(&id, c(0.0), c(1.0), c(5.0), c(-1.0), &g).unwrap();
        assert_abs_diff_eq!(1.0 - q, g.eval(lambda(0.0, 1.0, 5.0, -1.0)).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn invalid_queries_are_rejected() {
        assert!(CrossingQuery::new(vec![0.0, 1.0, 2.0], vec![0]).is_err());
        assert!(CrossingQuery::new(vec![0.0, 2.0, 1.0, 3.0], vec![0]).is_err());
        assert!(CrossingQuery::new(vec![0.0, 1.0, 2.0, 3.0], vec![]).is_err());
        assert!(CrossingQuery::new(vec![0.0, 1.0, 2.0, 3.0], vec![2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn crossing_is_mobius_invariant(
            gaps in prop::collection::vec(0.2f64..2.0, 6),
            x0 in -3.0f64..0.0,
            a in 0.5f64..2.0, b in -1.0f64..1.0, c in -0.3f64..0.3,
            pair in 0usize..3,
        ) {
            let mut pts = vec![x0];
            for g in &gaps[..5] {
                pts.push(pts.last().unwrap() + g);
            }
            let subset = vec![pair, (pair + 1) % 3];
            let q = CrossingQuery::new(pts, subset).unwrap();
            let d = 1.0 + c * c;
            let m = Mobius::new(a, b, c, d).unwrap();
            prop_assume!(q.mapped(&m).is_ok());
            let v = fk_crossing_continuum(&q).unwrap();
            let w = fk_crossing_continuum(&q.mapped(&m).unwrap()).unwrap();
            prop_assert!((v.value - w.value).abs() < 1e-8, "{} vs {}", v.value, w.value);
            let total: f64 = v.ratios.iter().sum();
            prop_assert!(v.ratios.iter().all(|&r| r > 0.0) && total.is_finite());
        }
    }
}
