//! The discrete fermionic observable, its boundary behaviour and the
//! integrated functions built from its square.

pub mod bvp;
pub mod checks;
pub mod trace;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::lattice::{BoundaryConditions, Domain, Site};
use crate::lowtemp::{Enumerator, KahanSum, Source};
use crate::{IflError, Result};

pub use trace::{half_angle_phase, winding_units, OuterArcs, Resolution};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Raw,
    Normalized,
}

/// Observable values on the decorated sites of a domain.
#[derive(Clone, Debug)]
pub struct DiscreteObservable {
    pub values: BTreeMap<Site, Complex64>,
    /// Outer normal at the first source.
    pub reference: usize,
    pub reference_eta: Complex64,
    pub normalization: Normalization,
    /// Configurations visited per site.
    pub config_count: u64,
}

impl DiscreteObservable {
    pub fn get(&self, site: Site) -> Option<Complex64> {
        self.values.get(&site).copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.values().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Enumeration context shared by all sites of one observable.
pub struct ObservableContext<'a> {
    dom: &'a Domain,
    bc: &'a BoundaryConditions,
    en: Enumerator<'a>,
    sources: Vec<usize>,
    arcs: OuterArcs,
    resolution: Resolution,
}

impl<'a> ObservableContext<'a> {
    pub fn new(dom: &'a Domain, bc: &'a BoundaryConditions) -> Result<Self> {
        let sources = bc.source_normals();
        let arcs = OuterArcs::nested(dom, &sources[1..]);
        Ok(ObservableContext {
            dom,
            bc,
            en: Enumerator::with_bc(dom, bc)?,
            sources,
            arcs,
            resolution: Resolution::TurnRight,
        })
    }

    pub fn with_resolution(mut self, resolution: Resolution) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn domain(&self) -> &'a Domain {
        self.dom
    }

    pub fn bc(&self) -> &'a BoundaryConditions {
        self.bc
    }

    /// Source normals, first source first.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn reference_eta(&self) -> Complex64 {
        self.dom.normals()[self.sources[0]].eta()
    }

    pub fn config_count(&self) -> u64 {
        self.en.config_count()
    }

    fn source_list(&self, site: Site) -> Vec<Source> {
        let mut s: Vec<Source> = self
            .sources
            .iter()
            .map(|&n| Source::Site(Site::Normal(n)))
            .collect();
        s.push(Source::Site(site));
        s
    }

    /// The defining sum at any site other than a source, free midpoints included.
    pub fn raw_value(&self, site: Site) -> Result<Complex64> {
        if let Site::Normal(n) = site {
            if self.sources.contains(&n) {
                return Err(IflError::InvalidArgument(
                    "site coincides with a source normal".into(),
                ));
            }
        }
        let sources = self.source_list(site);
        let end = sources.len() - 1;
        let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
        let mut failure = None;
        self.en.for_each_config(&sources, |cfg, w| {
            if failure.is_some() {
                return;
            }
            match winding_units(self.dom, cfg, 0, end, &self.arcs, self.resolution) {
                Ok(units) => {
                    let t = half_angle_phase(units) * w;
                    re.add(t.re);
                    im.add(t.im);
                }
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(I * self.reference_eta() * Complex64::new(re.value(), im.value()))
    }

    /// The observable at a corner, outer normal or non-free midpoint.
    pub fn value(&self, site: Site) -> Result<Complex64> {
        if let Site::Mid(e) = site {
            if self.bc.is_free_edge(e) {
                return Err(IflError::InvalidArgument(
                    "midpoint lies on a free arc; use extend_to_free".into(),
                ));
            }
        }
        self.raw_value(site)
    }

    /// Sites where the observable is defined directly.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = self.dom.inner_corners();
        for e in 0..self.dom.edges().len() {
            if !self.bc.is_free_edge(e) {
                out.push(Site::Mid(e));
            }
        }
        for n in 0..self.dom.normals().len() {
            if !self.sources.contains(&n) {
                out.push(Site::Normal(n));
            }
        }
        out
    }

    /// Raw values at every site.
    pub fn compute(&self) -> Result<DiscreteObservable> {
        let mut values = BTreeMap::new();
        for site in self.sites() {
            values.insert(site, self.raw_value(site)?);
        }
        Ok(DiscreteObservable {
            values,
            reference: self.sources[0],
            reference_eta: self.reference_eta(),
            normalization: Normalization::Raw,
            config_count: self.config_count(),
        })
    }

    /// Z with decorated edges at the sources and at the closing normal.
    pub fn closing_partition_function(&self) -> Result<f64> {
        let sources = self.source_list(Site::Normal(self.bc.closing_normal()));
        self.en.partition_function(&sources)
    }

    /// Divide by 2^{1/4} sqrt(mesh) Z(sources, closing normal).
    pub fn normalize(&self, obs: &DiscreteObservable) -> Result<DiscreteObservable> {
        let scale = normalization_scale(self.dom.mesh()) * self.closing_partition_function()?;
        Ok(scaled(obs, 1.0 / scale))
    }
}

/// 2^{1/4} sqrt(mesh).
pub fn normalization_scale(mesh: f64) -> f64 {
    2f64.powf(0.25) * mesh.sqrt()
}

fn scaled(obs: &DiscreteObservable, factor: f64) -> DiscreteObservable {
    DiscreteObservable {
        values: obs.values.iter().map(|(&k, &v)| (k, v * factor)).collect(),
        normalization: Normalization::Normalized,
        ..obs.clone()
    }
}

/// Observable at one site with default conventions.
pub fn observable(dom: &Domain, bc: &BoundaryConditions, site: Site) -> Result<Complex64> {
    ObservableContext::new(dom, bc)?.value(site)
}

/// Raw observable at all sites.
pub fn compute_observable(dom: &Domain, bc: &BoundaryConditions) -> Result<DiscreteObservable> {
    ObservableContext::new(dom, bc)?.compute()
}

/// Normalized observable at all sites.
pub fn compute_normalized(dom: &Domain, bc: &BoundaryConditions) -> Result<DiscreteObservable> {
    let ctx = ObservableContext::new(dom, bc)?;
    let raw = ctx.compute()?;
    ctx.normalize(&raw)
}

/// The line direction at each outer normal, transported counterclockwise
/// from the first source and flipped after every later source.
pub fn boundary_eta(dom: &Domain, bc: &BoundaryConditions) -> Vec<Complex64> {
    let normals = dom.normals();
    let sources = bc.source_normals();
    let start = sources[0];
    let n = normals.len();
    let theta0 = normals[start].theta;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut sign = 1.0;
    for step in 0..n {
        let i = (start + step) % n;
        let theta = theta0 + dom.normal_lift(start, i);
        out[i] = crate::lattice::eta_from_angle(theta) * sign;
        if step > 0 && sources[1..].contains(&i) {
            sign = -sign;
        }
    }
    out
}

/// Value at a free midpoint from the two corners beside it, the edge oriented
/// with the domain on its left.
pub fn extend_to_free(
    dom: &Domain,
    bc: &BoundaryConditions,
    obs: &DiscreteObservable,
    e: usize,
) -> Result<Complex64> {
    let (q1, q2) = free_edge_corners(dom, bc, e)?;
    let f1 = obs
        .get(q1)
        .ok_or_else(|| IflError::InvalidArgument("corner value missing".into()))?;
    let f2 = obs
        .get(q2)
        .ok_or_else(|| IflError::InvalidArgument("corner value missing".into()))?;
    let r = Complex64::from_polar(SQRT_2, -FRAC_PI_4);
    let l = Complex64::from_polar(SQRT_2, FRAC_PI_4);
    Ok(r * f2 + l * f1)
}

/// Start vertex, direction and the corners `(q1, q2)` inside the domain next to
/// a free boundary edge traversed with the domain on the left.
pub fn free_edge_corners(dom: &Domain, bc: &BoundaryConditions, e: usize) -> Result<(Site, Site)> {
    let (v, d, w) = free_edge_orientation(dom, bc, e)?;
    Ok((
        Site::Corner { vertex: v, dir: (d + 1) % 8 },
        Site::Corner { vertex: w, dir: (d + 3) % 8 },
    ))
}

/// `(start, direction, end)` of a free edge oriented with the domain on the left.
pub fn free_edge_orientation(
    dom: &Domain,
    bc: &BoundaryConditions,
    e: usize,
) -> Result<(usize, u8, usize)> {
    if !bc.is_free_edge(e) {
        return Err(IflError::InvalidArgument("edge is not on a free arc".into()));
    }
    let edge = dom.edges()[e];
    if dom.edge_faces(e)[0].is_some() {
        Ok((edge.from, edge.dir, edge.to))
    } else {
        Ok((edge.to, (edge.dir + 4) % 8, edge.from))
    }
}

/// Unit direction of an oriented edge raised to the power -1/2, times i.
pub fn free_line(dir: u8) -> Complex64 {
    I * Complex64::from_polar(1.0, -f64::from(dir) * PI / 8.0)
}

#[cfg(test)]
mod tests;
