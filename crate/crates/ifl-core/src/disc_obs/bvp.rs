//! The normalized observable as the solution of its discrete boundary value
//! problem: projection relations around every edge, lines at the outer
//! normals, the corner rotation across free edges, a twisted line at each
//! source and one normalization at the closing normal. The real corner
//! projections are the unknowns; the system is solved in the least-squares
//! sense and is consistent, so the residual measures round-off only.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

use crate::lattice::{BoundaryConditions, Domain, NormalKind, Site};
use crate::linalg::{least_squares, SparseRow};
use crate::{IflError, Result};

use super::{boundary_eta, free_edge_orientation, normalization_scale, DiscreteObservable, Normalization};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct BvpSolution {
    pub observable: DiscreteObservable,
    pub unknowns: usize,
    pub equations: usize,
    pub residual: f64,
    pub bandwidth: usize,
}

/// Solves for the normalized observable at corners, non-free midpoints and
/// the outer normals of vertices that are not strictly free.
pub fn solve(dom: &Domain, bc: &BoundaryConditions) -> Result<BvpSolution> {
    let corners = corner_sites(dom, bc);
    let index: HashMap<Site, usize> = corners.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let eta = |s: Site| dom.site_eta(s).expect("corner sites carry lines");
    let col = |s: Site| -> Result<usize> {
        index
            .get(&s)
            .copied()
            .ok_or_else(|| IflError::Numerical(format!("corner {s:?} missing from the unknowns")))
    };
    let sources = bc.source_normals();
    let mut rows = Vec::new();

    // projections around each non-free edge: the two orthogonal corners
    // determine the value, which must project onto the other two
    for e in 0..dom.edges().len() {
        if bc.is_free_edge(e) {
            continue;
        }
        let [vl, vr, wl, wr] = edge_corners(dom, e)?;
        for target in [vr, wl] {
            let et = eta(target);
            rows.push(SparseRow {
                entries: vec![
                    (col(vl)?, (eta(vl) * et.conj()).re),
                    (col(wr)?, (eta(wr) * et.conj()).re),
                    (col(target)?, -1.0),
                ],
                rhs: 0.0,
            });
        }
    }

    // lines at outer edge normals, twisted by i at the sources
    for (n, normal) in dom.normals().iter().enumerate() {
        if normal.kind() != NormalKind::Edge || bc.vertex_strictly_free(dom, normal.vertex) {
            continue;
        }
        let line = if sources.contains(&n) { I * normal.eta() } else { normal.eta() };
        let side = |d: u8| -> Result<(usize, f64)> {
            let q = Site::Normal(dom.normal_at(normal.vertex, d).ok_or_else(|| {
                IflError::InvalidDomain("outer edge normal without flanking corners".into())
            })?);
            Ok((col(q)?, (line * eta(q).conj()).re))
        };
        let (p, cp) = side((normal.dir + 1) % 8)?;
        let (m, cm) = side((normal.dir + 7) % 8)?;
        rows.push(SparseRow {
            entries: vec![(p, cm), (m, -cp)],
            rhs: 0.0,
        });
    }

    // corner rotation across free edges
    for e in 0..dom.edges().len() {
        if !bc.is_free_edge(e) {
            continue;
        }
        let (v, d, w) = free_edge_orientation(dom, bc, e)?;
        let q1 = Site::Corner { vertex: v, dir: (d + 1) % 8 };
        let q2 = Site::Corner { vertex: w, dir: (d + 3) % 8 };
        let factor = (Complex64::from_polar(1.0, -FRAC_PI_4) * eta(q1) * eta(q2).conj()).re;
        rows.push(SparseRow {
            entries: vec![(col(q2)?, 1.0), (col(q1)?, -factor)],
            rhs: 0.0,
        });
    }

    // equal boundary partition functions at both ends of every other free arc
    let transported = boundary_eta(dom, bc);
    let normal_expr = |n: usize| -> Result<(usize, f64)> {
        let normal = &dom.normals()[n];
        if sources.contains(&n) || bc.vertex_strictly_free(dom, normal.vertex) {
            return Err(IflError::InvalidBc(
                "free arc ends at a source or between two free arcs; not supported by the linear solver"
                    .into(),
            ));
        }
        match normal.kind() {
            NormalKind::Corner => Ok((col(Site::Normal(n))?, 1.0)),
            NormalKind::Edge => {
                let q = Site::Normal(dom.normal_at(normal.vertex, (normal.dir + 1) % 8).unwrap());
                Ok((col(q)?, 1.0 / (normal.eta() * eta(q).conj()).re))
            }
        }
    };
    let b = bc.b();
    for i in 0..bc.k() - 1 {
        let mut entries = Vec::new();
        for (mark, sign) in [(&b[2 * i], 1.0), (&b[2 * i + 1], -1.0)] {
            let n = mark.normal;
            let (c, coef) = normal_expr(n)?;
            let proj = (dom.normals()[n].eta() * transported[n].conj()).re;
            entries.push((c, sign * coef * proj));
        }
        rows.push(SparseRow { entries, rhs: 0.0 });
    }

    let closing = bc.closing_normal();
    let target = -transported[closing] / normalization_scale(dom.mesh());
    let qc = Site::Normal(closing);
    rows.push(SparseRow {
        entries: vec![(col(qc)?, 1.0)],
        rhs: (target * eta(qc).conj()).re,
    });

    let ls = least_squares(corners.len(), &rows)?;
    let r = &ls.x;
    let mut values = BTreeMap::new();
    for (i, &s) in corners.iter().enumerate() {
        values.insert(s, eta(s) * r[i]);
    }
    for e in 0..dom.edges().len() {
        if bc.is_free_edge(e) {
            continue;
        }
        let [vl, _, _, wr] = edge_corners(dom, e)?;
        values.insert(Site::Mid(e), eta(vl) * r[index[&vl]] + eta(wr) * r[index[&wr]]);
    }
    for (n, normal) in dom.normals().iter().enumerate() {
        if normal.kind() != NormalKind::Edge
            || sources.contains(&n)
            || bc.vertex_strictly_free(dom, normal.vertex)
        {
            continue;
        }
        let q = Site::Normal(dom.normal_at(normal.vertex, (normal.dir + 1) % 8).unwrap());
        let c = (normal.eta() * eta(q).conj()).re;
        values.insert(Site::Normal(n), normal.eta() * (r[index[&q]] / c));
    }
    let a1 = sources[0];
    Ok(BvpSolution {
        observable: DiscreteObservable {
            values,
            reference: a1,
            reference_eta: dom.normals()[a1].eta(),
            normalization: Normalization::Normalized,
            config_count: 0,
        },
        unknowns: corners.len(),
        equations: rows.len(),
        residual: ls.residual,
        bandwidth: ls.bandwidth,
    })
}

/// Corners beside an edge `v -> w`: left and right at `v`, then left and
/// right at `w`, each an inner corner or an outer corner normal.
fn edge_corners(dom: &Domain, e: usize) -> Result<[Site; 4]> {
    let edge = dom.edges()[e];
    let d = edge.dir;
    let at = |v: usize, dir: u8| -> Result<Site> {
        let dir = dir % 8;
        if let Some(n) = dom.normal_at(v, dir) {
            return Ok(Site::Normal(n));
        }
        if dom.has_face(crate::lattice::corner_face(dom.vertices()[v], dir)) {
            return Ok(Site::Corner { vertex: v, dir });
        }
        Err(IflError::InvalidDomain(format!("no corner at vertex {v} in direction {dir}")))
    };
    Ok([
        at(edge.from, d + 1)?,
        at(edge.from, d + 7)?,
        at(edge.to, d + 3)?,
        at(edge.to, d + 5)?,
    ])
}

/// Inner corners and outer corner normals of vertices that are not strictly
/// free, ordered by position (row-major) to keep the normal equations banded.
fn corner_sites(dom: &Domain, bc: &BoundaryConditions) -> Vec<Site> {
    let mut sites = dom.inner_corners();
    for (n, normal) in dom.normals().iter().enumerate() {
        if normal.kind() == NormalKind::Corner && !bc.vertex_strictly_free(dom, normal.vertex) {
            sites.push(Site::Normal(n));
        }
    }
    let key = |s: &Site| {
        let (x, y) = dom.site_point(*s);
        ((4.0 * y).round() as i64, (4.0 * x).round() as i64)
    };
    sites.sort_by_key(key);
    sites
}
