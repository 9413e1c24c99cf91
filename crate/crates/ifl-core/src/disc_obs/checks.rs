//! Identity checks on computed observables and the integrated functions H.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_4, SQRT_2};

use num_complex::Complex64;
use serde::Serialize;

use crate::lattice::{corner_face, step, BoundaryConditions, Domain, NormalKind, Point, Site};
use crate::lowtemp::{Enumerator, Source};
use crate::{IflError, Result};

use super::{
    boundary_eta, extend_to_free, free_edge_corners, free_edge_orientation, free_line,
    DiscreteObservable, ObservableContext,
};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Weight of a boundary term in the modified Laplacian.
pub const MODIFIED_WEIGHT: f64 = 2.0 * SQRT_2 - 2.0;

/// Largest defect of an identity, with the scale it should be compared against.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DefectReport {
    pub max_defect: f64,
    pub scale: f64,
    pub checked: usize,
    pub worst: Option<String>,
}

impl DefectReport {
    fn new(scale: f64) -> Self {
        DefectReport {
            scale,
            ..Default::default()
        }
    }

    fn record(&mut self, defect: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        if defect > self.max_defect || (defect.is_nan() && !self.max_defect.is_nan()) {
            self.max_defect = defect;
            self.worst = Some(what());
        }
    }

    /// Defect divided by the scale (or the defect itself for a zero scale).
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_defect / self.scale
        } else {
            self.max_defect
        }
    }
}

/// Projection of `w` onto the line through `eta`.
pub fn project(w: Complex64, eta: Complex64) -> Complex64 {
    eta * (w * eta.conj()).re
}

/// A corner of the domain or an outer corner normal, at vertex `v` in the odd
/// direction `d`.
fn corner_site(dom: &Domain, v: usize, d: u8) -> Option<Site> {
    let d = d % 8;
    if let Some(n) = dom.normal_at(v, d) {
        return Some(Site::Normal(n));
    }
    dom.has_face(corner_face(dom.vertices()[v], d))
        .then_some(Site::Corner { vertex: v, dir: d })
}

/// Corners `[left at v, right at v, left at w, right at w]` of an edge `v -> w`.
fn edge_corner_sites(dom: &Domain, e: usize) -> [Option<Site>; 4] {
    let edge = dom.edges()[e];
    let d = edge.dir;
    [
        corner_site(dom, edge.from, d + 1),
        corner_site(dom, edge.from, d + 7),
        corner_site(dom, edge.to, d + 3),
        corner_site(dom, edge.to, d + 5),
    ]
}

/// Every projection pair `(z, q)` with its defect |Proj_q F(z) - F(q)|.
pub fn shol_defects(
    dom: &Domain,
    bc: &BoundaryConditions,
    obs: &DiscreteObservable,
) -> Vec<(Site, Site, f64)> {
    let mut out = Vec::new();
    let mut pair = |z: Site, q: Site| {
        if let (Some(fz), Some(fq), Some(eta)) = (obs.get(z), obs.get(q), dom.site_eta(q)) {
            out.push((z, q, (project(fz, eta) - fq).norm()));
        }
    };
    for e in 0..dom.edges().len() {
        if bc.is_free_edge(e) {
            continue;
        }
        for q in edge_corner_sites(dom, e).into_iter().flatten() {
            pair(Site::Mid(e), q);
        }
    }
    for (n, normal) in dom.normals().iter().enumerate() {
        if normal.kind() != NormalKind::Edge || bc.vertex_strictly_free(dom, normal.vertex) {
            continue;
        }
        for d in [normal.dir + 1, normal.dir + 7] {
            if let Some(q) = corner_site(dom, normal.vertex, d) {
                pair(Site::Normal(n), q);
            }
        }
    }
    out
}

/// Largest projection defect over all non-free pairs.
pub fn shol_check(dom: &Domain, bc: &BoundaryConditions, obs: &DiscreteObservable) -> DefectReport {
    let mut rep = DefectReport::new(obs.max_abs());
    for (z, q, d) in shol_defects(dom, bc, obs) {
        rep.record(d, || format!("{z:?} / {q:?}"));
    }
    rep
}

/// F at every outer normal against minus the transported line times the
/// partition function with a decorated edge there.
pub fn boundary_identity_check(
    ctx: &ObservableContext,
    raw: &DiscreteObservable,
) -> Result<DefectReport> {
    let dom = ctx.domain();
    let bc = ctx.bc();
    let en = Enumerator::with_bc(dom, bc)?;
    let eta = boundary_eta(dom, bc);
    let mut rep = DefectReport::new(raw.max_abs());
    for n in 0..dom.normals().len() {
        let Some(f) = raw.get(Site::Normal(n)) else { continue };
        let mut sources: Vec<Source> = ctx
            .sources()
            .iter()
            .map(|&s| Source::Site(Site::Normal(s)))
            .collect();
        sources.push(Source::Site(Site::Normal(n)));
        let z = en.partition_function(&sources)?;
        rep.record((f + eta[n] * z).norm(), || format!("normal {n}"));
    }
    Ok(rep)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FreeReport {
    /// Distance of the extended value from its line i z^{-1/2} R.
    pub line: DefectReport,
    /// Corner rotation F(q2) = e^{-i pi/4} F(q1).
    pub rotation: DefectReport,
}

/// Line and corner-rotation checks on free midpoints.
pub fn free_checks(
    dom: &Domain,
    bc: &BoundaryConditions,
    obs: &DiscreteObservable,
) -> Result<FreeReport> {
    let scale = obs.max_abs();
    let mut rep = FreeReport {
        line: DefectReport::new(scale),
        rotation: DefectReport::new(scale),
    };
    let rot = Complex64::from_polar(1.0, -FRAC_PI_4);
    for e in 0..dom.edges().len() {
        if !bc.is_free_edge(e) {
            continue;
        }
        let f = extend_to_free(dom, bc, obs, e)?;
        let (_, d, _) = free_edge_orientation(dom, bc, e)?;
        let line = free_line(d);
        rep.line.record((f * line.conj()).im.abs(), || format!("edge {e}"));
        let (q1, q2) = free_edge_corners(dom, bc, e)?;
        let (f1, f2) = (obs.get(q1).unwrap(), obs.get(q2).unwrap());
        rep.rotation.record((f2 - rot * f1).norm(), || format!("edge {e}"));
    }
    Ok(rep)
}

/// |F(q1)|^2 + |F(q3)|^2 = |F(e)|^2 = |F(q2)|^2 + |F(q4)|^2 around non-free edges.
pub fn plaquette_check(
    dom: &Domain,
    bc: &BoundaryConditions,
    obs: &DiscreteObservable,
) -> DefectReport {
    let mut rep = DefectReport::new(obs.max_abs().powi(2));
    for e in 0..dom.edges().len() {
        if bc.is_free_edge(e) {
            continue;
        }
        let Some(fe) = obs.get(Site::Mid(e)) else { continue };
        let c = edge_corner_sites(dom, e);
        let sq = |s: Option<Site>| s.and_then(|s| obs.get(s)).map(|v| v.norm_sqr());
        if let (Some(vl), Some(vr), Some(wl), Some(wr)) = (sq(c[0]), sq(c[1]), sq(c[2]), sq(c[3])) {
            let m = fe.norm_sqr();
            let d = (vl + wr - m).abs().max((vr + wl - m).abs());
            rep.record(d, || format!("edge {e}"));
        }
    }
    rep
}

/// |F(n_{b_{2i-1}})| = |F(n_{b_{2i}})| on every free arc whose end normals
/// carry values.
pub fn jump_check(bc: &BoundaryConditions, obs: &DiscreteObservable) -> DefectReport {
    let mut rep = DefectReport::new(obs.max_abs());
    for (i, pair) in bc.b().chunks(2).enumerate() {
        let f = |k: usize| obs.get(Site::Normal(pair[k].normal)).map(|v| v.norm());
        if let (Some(x), Some(y)) = (f(0), f(1)) {
            rep.record((x - y).abs(), || format!("free arc {}", i + 1));
        }
    }
    rep
}

/// Integrated squares of a normalized observable.
#[derive(Clone, Debug, Serialize)]
pub struct HPair {
    /// H at every vertex of the domain, indexed like the vertices.
    pub h_vertices: Vec<f64>,
    /// H at the faces of the domain and the outer faces reached through
    /// outer corners.
    pub h_faces: BTreeMap<Point, f64>,
    pub base_face: Point,
    /// Largest mismatch of the defining increments once integrated.
    pub closure_defect: f64,
    pub worst_link: Option<String>,
}

impl HPair {
    pub fn face(&self, p: Point) -> Option<f64> {
        self.h_faces.get(&p).copied()
    }
}

/// Vertex-face links through corners: `(vertex, face, corner)`.
fn corner_links(dom: &Domain, bc: &BoundaryConditions) -> Vec<(usize, Point, Site)> {
    let mut out = Vec::new();
    for (v, &p) in dom.vertices().iter().enumerate() {
        let strictly_free = bc.vertex_strictly_free(dom, v);
        for d in [1u8, 3, 5, 7] {
            let face = corner_face(p, d);
            if dom.has_face(face) {
                out.push((v, face, Site::Corner { vertex: v, dir: d }));
            } else if !strictly_free {
                if let Some(n) = dom.normal_at(v, d) {
                    out.push((v, face, Site::Normal(n)));
                }
            }
        }
    }
    out
}

/// Outer face across the first boundary edge that is not free.
pub fn default_base_face(dom: &Domain, bc: &BoundaryConditions) -> Result<Point> {
    for bv in dom.boundary() {
        let e = bv.out_edge;
        if bc.is_free_edge(e) {
            continue;
        }
        return Ok(outer_face_across(dom, e));
    }
    Err(IflError::InvalidBc("no fixed boundary edge".into()))
}

fn outer_face_across(dom: &Domain, e: usize) -> Point {
    let edge = dom.edges()[e];
    let v = dom.vertices()[edge.from];
    let left = corner_face(v, edge.dir + 1);
    if dom.has_face(left) {
        corner_face(v, edge.dir + 7)
    } else {
        left
    }
}

/// Integrates H(v) - H(u) = sqrt(2) mesh |F(q)|^2 from the base face.
pub fn build_h(
    dom: &Domain,
    bc: &BoundaryConditions,
    obs: &DiscreteObservable,
    base_face: Option<Point>,
) -> Result<HPair> {
    let base = match base_face {
        Some(p) => p,
        None => default_base_face(dom, bc)?,
    };
    let links = corner_links(dom, bc);
    let scale = SQRT_2 * dom.mesh();
    let mut inc = Vec::with_capacity(links.len());
    for &(_, _, q) in &links {
        let f = obs
            .get(q)
            .ok_or_else(|| IflError::InvalidArgument(format!("observable missing at {q:?}")))?;
        inc.push(scale * f.norm_sqr());
    }
    let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut by_face: HashMap<Point, Vec<usize>> = HashMap::new();
    for (k, &(v, u, _)) in links.iter().enumerate() {
        by_vertex.entry(v).or_default().push(k);
        by_face.entry(u).or_default().push(k);
    }
    if !by_face.contains_key(&base) {
        return Err(IflError::InvalidArgument(format!("base face {base:?} is not linked")));
    }
    let mut hv: Vec<Option<f64>> = vec![None; dom.vertices().len()];
    let mut hf: HashMap<Point, f64> = HashMap::from([(base, 0.0)]);
    enum Node {
        V(usize),
        F(Point),
    }
    let mut queue = VecDeque::from([Node::F(base)]);
    while let Some(node) = queue.pop_front() {
        match node {
            Node::F(u) => {
                let h = hf[&u];
                for &k in &by_face[&u] {
                    let v = links[k].0;
                    if hv[v].is_none() {
                        hv[v] = Some(h + inc[k]);
                        queue.push_back(Node::V(v));
                    }
                }
            }
            Node::V(v) => {
                let h = hv[v].unwrap();
                for &k in &by_vertex[&v] {
                    let u = links[k].1;
                    if let std::collections::hash_map::Entry::Vacant(slot) = hf.entry(u) {
                        slot.insert(h - inc[k]);
                        queue.push_back(Node::F(u));
                    }
                }
            }
        }
    }
    let h_vertices: Vec<f64> = hv
        .into_iter()
        .map(|h| h.ok_or_else(|| IflError::Numerical("vertex not reached by integration".into())))
        .collect::<Result<_>>()?;
    let mut closure_defect: f64 = 0.0;
    let mut worst_link = None;
    for (k, &(v, u, q)) in links.iter().enumerate() {
        let d = (h_vertices[v] - hf[&u] - inc[k]).abs();
        if d > closure_defect {
            closure_defect = d;
            worst_link = Some(format!("vertex {:?}, face {u:?}, corner {q:?}", dom.vertices()[v]));
        }
    }
    Ok(HPair {
        h_vertices,
        h_faces: hf.into_iter().collect(),
        base_face: base,
        closure_defect,
        worst_link,
    })
}

/// Values of H along the boundary.
#[derive(Clone, Debug, Serialize)]
pub struct HBoundaryReport {
    /// Largest |H| at outer faces across plus/minus edges.
    pub outer_faces: f64,
    /// Mean of H at the vertices of each free arc, by arc index in the marks.
    pub free_constants: BTreeMap<usize, f64>,
    /// Largest spread of H along a single free arc.
    pub free_spread: f64,
    /// Constant on the free arc ending at the closing mark.
    pub closing_constant: f64,
    /// Most negative H at vertices of plus/minus arcs.
    pub min_fixed_vertex: f64,
    /// Largest excess of H over the arc constant at faces next to free arcs.
    pub max_free_face_excess: f64,
}

/// Vertices of each free arc, keyed by the arc's index in the marks.
fn free_arc_vertices(dom: &Domain, bc: &BoundaryConditions) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (e, edge) in dom.edges().iter().enumerate() {
        if !bc.is_free_edge(e) {
            continue;
        }
        let arc = bc.edge_arc(e).expect("free edges lie on arcs");
        let list = out.entry(arc).or_default();
        for v in [edge.from, edge.to] {
            if !list.contains(&v) {
                list.push(v);
            }
        }
    }
    out
}

fn free_constants(dom: &Domain, bc: &BoundaryConditions, h: &HPair) -> BTreeMap<usize, f64> {
    free_arc_vertices(dom, bc)
        .into_iter()
        .map(|(arc, vs)| {
            let mean = vs.iter().map(|&v| h.h_vertices[v]).sum::<f64>() / vs.len() as f64;
            (arc, mean)
        })
        .collect()
}

pub fn h_boundary_report(dom: &Domain, bc: &BoundaryConditions, h: &HPair) -> HBoundaryReport {
    let mut outer: f64 = 0.0;
    let mut min_fixed = f64::INFINITY;
    let mut excess = f64::NEG_INFINITY;
    let constants = free_constants(dom, bc, h);
    let on_free: Vec<bool> = {
        let mut m = vec![false; dom.vertices().len()];
        for vs in free_arc_vertices(dom, bc).values() {
            for &v in vs {
                m[v] = true;
            }
        }
        m
    };
    for bv in dom.boundary() {
        let e = bv.out_edge;
        let across = outer_face_across(dom, e);
        if bc.is_free_edge(e) {
            let c = constants[&bc.edge_arc(e).unwrap()];
            let inner = dom.edge_faces(e).into_iter().flatten().next().unwrap();
            let hu = h.face(dom.faces()[inner]).unwrap_or(f64::NAN);
            excess = excess.max(hu - c);
        } else if let Some(hf) = h.face(across) {
            outer = outer.max(hf.abs());
        }
        if !on_free[bv.vertex] {
            min_fixed = min_fixed.min(h.h_vertices[bv.vertex]);
        }
    }
    let mut spread: f64 = 0.0;
    for (arc, vs) in free_arc_vertices(dom, bc) {
        for &v in &vs {
            spread = spread.max((h.h_vertices[v] - constants[&arc]).abs());
        }
    }
    let closing_vertex = dom.normals()[bc.closing_normal()].vertex;
    let closing_arc = *free_arc_vertices(dom, bc)
        .iter()
        .find(|(_, vs)| vs.contains(&closing_vertex))
        .map(|(a, _)| a)
        .expect("closing mark ends a free arc");
    HBoundaryReport {
        outer_faces: outer,
        closing_constant: constants[&closing_arc],
        free_constants: constants,
        free_spread: spread,
        min_fixed_vertex: min_fixed,
        max_free_face_excess: excess,
    }
}

/// H(v) - H(v') = Im[F^2(mid)(v - v')] along non-free edges, and the same for
/// faces on either side of interior edges.
pub fn increment_check(
    dom: &Domain,
    bc: &BoundaryConditions,
    obs: &DiscreteObservable,
    h: &HPair,
) -> DefectReport {
    let mut rep = DefectReport::new(obs.max_abs().powi(2) * dom.mesh());
    let mesh = dom.mesh();
    for (e, edge) in dom.edges().iter().enumerate() {
        if bc.is_free_edge(e) {
            continue;
        }
        let Some(f) = obs.get(Site::Mid(e)) else { continue };
        let f2 = f * f;
        let dv = dom.vertex_position(edge.from) - dom.vertex_position(edge.to);
        let lhs = h.h_vertices[edge.from] - h.h_vertices[edge.to];
        rep.record((lhs - (f2 * dv).im).abs(), || format!("vertices of edge {e}"));
        if let [Some(l), Some(r)] = dom.edge_faces(e) {
            let (pl, pr) = (dom.faces()[l], dom.faces()[r]);
            let du = Complex64::new(f64::from(pl.0 - pr.0), f64::from(pl.1 - pr.1)) * mesh;
            if let (Some(hl), Some(hr)) = (h.face(pl), h.face(pr)) {
                rep.record((hl - hr - (f2 * du).im).abs(), || format!("faces of edge {e}"));
            }
        }
    }
    rep
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LaplacianReport {
    /// Vertices where the modified Laplacian of H on vertices is below -tol.
    pub vertex_violations: Vec<(Point, f64)>,
    /// Faces where the modified Laplacian of H on faces exceeds tol.
    pub face_violations: Vec<(Point, f64)>,
    pub min_vertex_laplacian: f64,
    pub max_face_laplacian: f64,
    pub vertices_checked: usize,
    pub faces_checked: usize,
    /// Vertices skipped: plus/minus separators and free-arc vertices.
    pub skipped: Vec<Point>,
    /// Largest mismatch of the face Laplacian against the corner formula.
    pub corner_formula: DefectReport,
}

/// Sub- and superharmonicity of H under the boundary-modified Laplacian.
pub fn laplacian_check(
    dom: &Domain,
    bc: &BoundaryConditions,
    obs: &DiscreteObservable,
    h: &HPair,
    tol: f64,
) -> LaplacianReport {
    let c = MODIFIED_WEIGHT;
    let constants = free_constants(dom, bc, h);
    let mut rep = LaplacianReport {
        min_vertex_laplacian: f64::INFINITY,
        max_face_laplacian: f64::NEG_INFINITY,
        corner_formula: DefectReport::new(SQRT_2 * dom.mesh() * obs.max_abs().powi(2)),
        ..Default::default()
    };
    let mut skip = vec![false; dom.vertices().len()];
    // the plus/minus separators; the remaining sources sit on free arcs
    for a in bc.a() {
        skip[a.vertex] = true;
    }
    for vs in free_arc_vertices(dom, bc).values() {
        for &v in vs {
            skip[v] = true;
        }
    }
    for (v, &p) in dom.vertices().iter().enumerate() {
        if skip[v] {
            rep.skipped.push(p);
            continue;
        }
        let hv = h.h_vertices[v];
        let mut lap = 0.0;
        for d in [0u8, 2, 4, 6] {
            lap += match dom.edge_from(v, d) {
                Some(e) => h.h_vertices[dom.edges()[e].other(v)] - hv,
                None => c * (0.0 - hv),
            };
        }
        rep.vertices_checked += 1;
        rep.min_vertex_laplacian = rep.min_vertex_laplacian.min(lap);
        if lap < -tol {
            rep.vertex_violations.push((p, lap));
        }
    }
    let scale = SQRT_2 * dom.mesh();
    for (f, &p) in dom.faces().iter().enumerate() {
        let Some(hu) = h.face(p) else { continue };
        let edges = dom.face_edges(f);
        let mut lap = 0.0;
        let mut complete = true;
        for (k, d) in [6u8, 0, 2, 4].into_iter().enumerate() {
            let e = edges[k];
            let s = step(d);
            let q = (p.0 + s.0, p.1 + s.1);
            if dom.has_face(q) {
                lap += h.face(q).unwrap() - hu;
            } else if bc.is_free_edge(e) {
                lap += c * (constants[&bc.edge_arc(e).unwrap()] - hu);
            } else if let Some(hq) = h.face(q) {
                lap += hq - hu;
            } else {
                complete = false;
            }
        }
        if !complete {
            continue;
        }
        rep.faces_checked += 1;
        rep.max_face_laplacian = rep.max_face_laplacian.max(lap);
        if lap > tol {
            rep.face_violations.push((p, lap));
        }
        // corners clockwise from the lower right
        let vid = |x: i32, y: i32| dom.vertex_id((x, y)).unwrap();
        let corners = [
            Site::Corner { vertex: vid(p.0 + 1, p.1), dir: 3 },
            Site::Corner { vertex: vid(p.0, p.1), dir: 1 },
            Site::Corner { vertex: vid(p.0, p.1 + 1), dir: 7 },
            Site::Corner { vertex: vid(p.0 + 1, p.1 + 1), dir: 5 },
        ];
        let fc: Vec<Complex64> = corners.iter().map(|&s| obs.get(s).unwrap()).collect();
        let formula = -2.0 * scale * (fc[0] + I * fc[1] - fc[2] - I * fc[3]).norm_sqr();
        rep.corner_formula.record((formula - lap).abs(), || format!("face {p:?}"));
    }
    rep
}

/// All identity checks for one domain and boundary condition.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub config_count: u64,
    pub sites: usize,
    pub max_abs: f64,
    pub shol: DefectReport,
    pub boundary_identity: DefectReport,
    pub free: FreeReport,
    pub plaquette: DefectReport,
    pub jump: DefectReport,
    pub h: HPair,
    pub h_boundary: HBoundaryReport,
    pub increments: DefectReport,
    pub laplacian: LaplacianReport,
    pub winding_resolution: DefectReport,
}

impl VerificationReport {
    /// Relative defect of each identity; H quantities are measured against
    /// the largest |H| at a vertex (at least 1).
    pub fn defects(&self) -> Vec<(&'static str, f64)> {
        let h_scale = self.h.h_vertices.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        vec![
            ("shol", self.shol.relative()),
            ("free_line", self.free.line.relative()),
            ("corner_rotation", self.free.rotation.relative()),
            ("boundary_identity", self.boundary_identity.relative()),
            ("plaquette", self.plaquette.relative()),
            ("jump", self.jump.relative()),
            ("h_closure", self.h.closure_defect / h_scale),
            ("h_increments", self.increments.relative()),
            ("h_free_spread", self.h_boundary.free_spread / h_scale),
            ("h_outer_faces", self.h_boundary.outer_faces / h_scale),
            ("h_closing_constant", (self.h_boundary.closing_constant - 1.0).abs()),
            ("laplacian_corner_formula", self.laplacian.corner_formula.relative()),
            ("winding_resolution", self.winding_resolution.relative()),
        ]
    }

    /// Every defect within `tol` and no sign violation of the modified Laplacians.
    pub fn passes(&self, tol: f64) -> bool {
        self.laplacian.vertex_violations.is_empty()
            && self.laplacian.face_violations.is_empty()
            && self.defects().iter().all(|(_, d)| *d <= tol)
    }
}

/// Runs every check on the exhaustively computed observable.
pub fn verify_all(dom: &Domain, bc: &BoundaryConditions, tol: f64) -> Result<VerificationReport> {
    let ctx = ObservableContext::new(dom, bc)?;
    let raw = ctx.compute()?;
    let norm = ctx.normalize(&raw)?;
    let left = ObservableContext::new(dom, bc)?.with_resolution(super::Resolution::TurnLeft);
    let mut winding = DefectReport::new(raw.max_abs());
    for (&site, &v) in &raw.values {
        let w = left.raw_value(site)?;
        winding.record((w - v).norm(), || format!("{site:?}"));
    }
    let h = build_h(dom, bc, &norm, None)?;
    let h_boundary = h_boundary_report(dom, bc, &h);
    let laplacian = laplacian_check(dom, bc, &norm, &h, tol);
    Ok(VerificationReport {
        config_count: raw.config_count,
        sites: raw.values.len(),
        max_abs: raw.max_abs(),
        shol: shol_check(dom, bc, &raw),
        boundary_identity: boundary_identity_check(&ctx, &raw)?,
        free: free_checks(dom, bc, &raw)?,
        plaquette: plaquette_check(dom, bc, &raw),
        jump: jump_check(bc, &raw),
        increments: increment_check(dom, bc, &norm, &h),
        h,
        h_boundary,
        laplacian,
        winding_resolution: winding,
    })
}
