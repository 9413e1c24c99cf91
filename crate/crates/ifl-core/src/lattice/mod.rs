//! Simply connected square-lattice domains and their decorated graph.
//!
//! Faces are unit cells named by their lower-left corner. Directions are
//! integers mod 8 counting multiples of pi/4 counterclockwise from east:
//! even directions run along lattice edges, odd ones point into faces.
//! Every lattice vertex carries eight decorated edges, four half-edges to the
//! edge midpoints and four corner edges; those leaving the domain are the
//! outer normals.

mod boundary;

pub use boundary::{ArcSpec, BoundaryConditions, DomainSpec, Label, Marked};

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{IflError, Result};

pub type Point = (i32, i32);

/// Critical low-temperature weight per lattice edge.
pub const X_CRIT: f64 = std::f64::consts::SQRT_2 - 1.0;

pub fn half_edge_weight() -> f64 {
    X_CRIT.sqrt()
}

pub fn corner_weight() -> f64 {
    X_CRIT.sqrt() * (PI / 8.0).cos()
}

pub fn step(d: u8) -> Point {
    match d & 7 {
        0 => (1, 0),
        1 => (1, 1),
        2 => (0, 1),
        3 => (-1, 1),
        4 => (-1, 0),
        5 => (-1, -1),
        6 => (0, -1),
        _ => (1, -1),
    }
}

pub fn dir_angle(d: u8) -> f64 {
    f64::from(d & 7) * PI / 4.0
}

fn offset(p: Point, d: u8) -> Point {
    let s = step(d);
    (p.0 + s.0, p.1 + s.1)
}

/// Face containing the corner at `v` in the odd direction `d`.
pub fn corner_face(v: Point, d: u8) -> Point {
    let (dx, dy) = step(d | 1);
    (v.0 + (dx - 1) / 2, v.1 + (dy - 1) / 2)
}

/// Unit vector spanning the line of a corner or normal pointing at angle `theta`.
pub fn eta_from_angle(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, -(theta + PI / 2.0) / 2.0)
}

/// Smallest signed rotation from direction `from` to `to`, in units of pi/4.
pub fn turn(from: u8, to: u8) -> i32 {
    let t = (i32::from(to) - i32::from(from)).rem_euclid(8);
    if t > 4 {
        t - 8
    } else {
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// 0 for horizontal, 2 for vertical.
    pub dir: u8,
}

impl Edge {
    pub fn other(&self, v: usize) -> usize {
        if v == self.from {
            self.to
        } else {
            self.from
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormalKind {
    Edge,
    Corner,
}

#[derive(Clone, Debug)]
pub struct OuterNormal {
    pub vertex: usize,
    pub dir: u8,
    pub boundary_index: usize,
    /// Direction angle lifted continuously along the counterclockwise boundary.
    pub theta: f64,
}

impl OuterNormal {
    pub fn kind(&self) -> NormalKind {
        if self.dir % 2 == 0 {
            NormalKind::Edge
        } else {
            NormalKind::Corner
        }
    }

    pub fn eta(&self) -> Complex64 {
        eta_from_angle(self.theta)
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryVertex {
    pub vertex: usize,
    pub dir_in: u8,
    pub dir_out: u8,
    pub out_edge: usize,
    pub normals: std::ops::Range<usize>,
}

/// Decorated vertices carrying observable values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    /// Corner inside a face of the domain.
    Corner { vertex: usize, dir: u8 },
    /// Midpoint of a lattice edge of the domain.
    Mid(usize),
    /// Tip of an outer normal.
    Normal(usize),
}

/// What the decorated edge leaving a vertex in a given direction ends at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stub {
    InnerCorner,
    Half(usize),
    Normal(usize),
}

#[derive(Clone, Debug)]
pub struct Domain {
    mesh: f64,
    faces: Vec<Point>,
    face_set: HashSet<Point>,
    vertices: Vec<Point>,
    vertex_index: HashMap<Point, usize>,
    edges: Vec<Edge>,
    vertex_edges: Vec<[Option<usize>; 4]>,
    edge_faces: Vec<[Option<usize>; 2]>,
    face_edges: Vec<[usize; 4]>,
    boundary: Vec<BoundaryVertex>,
    boundary_of_vertex: Vec<Option<usize>>,
    boundary_of_edge: Vec<Option<usize>>,
    normals: Vec<OuterNormal>,
    normal_at: HashMap<(usize, u8), usize>,
}

impl Domain {
    pub fn rectangle(width: i32, height: i32, mesh: f64) -> Result<Self> {
        if width < 1 || height < 1 {
            return Err(IflError::InvalidDomain(format!(
                "rectangle {width}x{height} has no faces"
            )));
        }
        let faces: Vec<Point> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .collect();
        Self::from_faces(&faces, mesh)
    }

    pub fn from_faces(faces: &[Point], mesh: f64) -> Result<Self> {
        if faces.is_empty() {
            return Err(IflError::InvalidDomain("no faces".into()));
        }
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(IflError::InvalidDomain(format!("mesh {mesh} not positive")));
        }
        let mut face_list: Vec<Point> = faces.to_vec();
        face_list.sort_by_key(|&(x, y)| (y, x));
        face_list.dedup();
        let face_set: HashSet<Point> = face_list.iter().copied().collect();
        check_connected(&face_list, &face_set)?;

        let mut vertex_set: Vec<Point> = face_list
            .iter()
            .flat_map(|&(x, y)| [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)])
            .collect();
        vertex_set.sort_by_key(|&(x, y)| (y, x));
        vertex_set.dedup();
        let vertex_index: HashMap<Point, usize> =
            vertex_set.iter().enumerate().map(|(i, &p)| (p, i)).collect();

        let face_index: HashMap<Point, usize> =
            face_list.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let mut edges = Vec::new();
        let mut edge_index: HashMap<(usize, u8), usize> = HashMap::new();
        let mut vertex_edges = vec![[None; 4]; vertex_set.len()];
        let mut edge_faces = Vec::new();
        for (vi, &p) in vertex_set.iter().enumerate() {
            for dir in [0u8, 2] {
                let left = corner_face(p, dir + 1);
                let right = corner_face(p, dir + 7);
                let (lf, rf) = (face_index.get(&left), face_index.get(&right));
                if lf.is_none() && rf.is_none() {
                    continue;
                }
                let to = vertex_index[&offset(p, dir)];
                let e = edges.len();
                edges.push(Edge { from: vi, to, dir });
                edge_faces.push([lf.copied(), rf.copied()]);
                edge_index.insert((vi, dir), e);
                vertex_edges[vi][usize::from(dir / 2)] = Some(e);
                vertex_edges[to][usize::from(dir / 2 + 2)] = Some(e);
            }
        }
        let face_edges = face_list
            .iter()
            .map(|&(x, y)| {
                let v = |p: Point| vertex_index[&p];
                [
                    edge_index[&(v((x, y)), 0)],
                    edge_index[&(v((x + 1, y)), 2)],
                    edge_index[&(v((x, y + 1)), 0)],
                    edge_index[&(v((x, y)), 2)],
                ]
            })
            .collect();

        let mut dom = Domain {
            mesh,
            faces: face_list,
            face_set,
            vertices: vertex_set,
            vertex_index,
            edges,
            vertex_edges,
            edge_faces,
            face_edges,
            boundary: Vec::new(),
            boundary_of_vertex: Vec::new(),
            boundary_of_edge: Vec::new(),
            normals: Vec::new(),
            normal_at: HashMap::new(),
        };
        dom.trace_boundary()?;
        Ok(dom)
    }

    fn trace_boundary(&mut self) -> Result<()> {
        let nv = self.vertices.len();
        let mut out: Vec<Option<u8>> = vec![None; nv];
        let mut count = 0usize;
        for (vi, &p) in self.vertices.iter().enumerate() {
            for dir in [0u8, 2, 4, 6] {
                if self.face_set.contains(&corner_face(p, dir + 1))
                    && !self.face_set.contains(&corner_face(p, dir + 7))
                {
                    if out[vi].is_some() {
                        return Err(IflError::InvalidDomain(format!(
                            "boundary pinches at vertex {p:?}"
                        )));
                    }
                    out[vi] = Some(dir);
                    count += 1;
                }
            }
        }
        let start = (0..nv)
            .filter(|&v| out[v].is_some())
            .min_by_key(|&v| (self.vertices[v].1, self.vertices[v].0))
            .ok_or_else(|| IflError::InvalidDomain("no boundary".into()))?;
        let mut walk = Vec::with_capacity(count);
        let mut v = start;
        loop {
            let dir = out[v].expect("boundary vertex has an outgoing edge");
            walk.push((v, dir));
            v = self.vertex_index[&offset(self.vertices[v], dir)];
            if v == start {
                break;
            }
            if walk.len() > count {
                return Err(IflError::InvalidDomain("boundary walk does not close".into()));
            }
        }
        if walk.len() != count {
            return Err(IflError::InvalidDomain(
                "domain is not simply connected".into(),
            ));
        }

        let len = walk.len();
        let mut boundary = Vec::with_capacity(len);
        let mut normals: Vec<OuterNormal> = Vec::new();
        let mut theta_prev: Option<(f64, u8)> = None;
        for i in 0..len {
            let (vi, dir_out) = walk[i];
            let dir_in = walk[(i + len - 1) % len].1;
            let back = (dir_in + 4) % 8;
            let first = normals.len();
            let mut d = (back + 1) % 8;
            while d != dir_out {
                let theta = match theta_prev {
                    None => dir_angle(d),
                    Some((t, pd)) => t + f64::from(turn(pd, d)) * PI / 4.0,
                };
                theta_prev = Some((theta, d));
                self.normal_at.insert((vi, d), normals.len());
                normals.push(OuterNormal {
                    vertex: vi,
                    dir: d,
                    boundary_index: i,
                    theta,
                });
                d = (d + 1) % 8;
            }
            let out_edge = self
                .edge_from(vi, dir_out)
                .expect("boundary edge belongs to the domain");
            boundary.push(BoundaryVertex {
                vertex: vi,
                dir_in,
                dir_out,
                out_edge,
                normals: first..normals.len(),
            });
        }
        let mut boundary_of_vertex = vec![None; nv];
        let mut boundary_of_edge = vec![None; self.edges.len()];
        for (i, b) in boundary.iter().enumerate() {
            boundary_of_vertex[b.vertex] = Some(i);
            boundary_of_edge[b.out_edge] = Some(i);
        }
        self.boundary = boundary;
        self.boundary_of_vertex = boundary_of_vertex;
        self.boundary_of_edge = boundary_of_edge;
        self.normals = normals;
        Ok(())
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn faces(&self) -> &[Point] {
        &self.faces
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn boundary(&self) -> &[BoundaryVertex] {
        &self.boundary
    }

    pub fn normals(&self) -> &[OuterNormal] {
        &self.normals
    }

    pub fn face_edges(&self, f: usize) -> [usize; 4] {
        self.face_edges[f]
    }

    /// Faces left and right of an edge oriented from `from` to `to`.
    pub fn edge_faces(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_faces[e]
    }

    pub fn has_face(&self, p: Point) -> bool {
        self.face_set.contains(&p)
    }

    pub fn vertex_id(&self, p: Point) -> Option<usize> {
        self.vertex_index.get(&p).copied()
    }

    /// Lattice edge of the domain leaving `v` in the even direction `d`.
    pub fn edge_from(&self, v: usize, d: u8) -> Option<usize> {
        debug_assert!(d % 2 == 0);
        self.vertex_edges[v][usize::from((d & 7) / 2)]
    }

    pub fn boundary_index_of_vertex(&self, v: usize) -> Option<usize> {
        self.boundary_of_vertex[v]
    }

    /// Position of a boundary edge in the counterclockwise walk.
    pub fn boundary_index_of_edge(&self, e: usize) -> Option<usize> {
        self.boundary_of_edge[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_of_edge[e].is_some()
    }

    pub fn normal_at(&self, v: usize, d: u8) -> Option<usize> {
        self.normal_at.get(&(v, d & 7)).copied()
    }

    pub fn stub(&self, v: usize, d: u8) -> Option<Stub> {
        if let Some(n) = self.normal_at(v, d) {
            return Some(Stub::Normal(n));
        }
        if d % 2 == 0 {
            self.edge_from(v, d).map(Stub::Half)
        } else if self.face_set.contains(&corner_face(self.vertices[v], d)) {
            Some(Stub::InnerCorner)
        } else {
            None
        }
    }

    pub fn inner_corners(&self) -> Vec<Site> {
        let mut out = Vec::new();
        for (vi, &p) in self.vertices.iter().enumerate() {
            for d in [1u8, 3, 5, 7] {
                if self.face_set.contains(&corner_face(p, d)) {
                    out.push(Site::Corner { vertex: vi, dir: d });
                }
            }
        }
        out
    }

    /// The two corners adjacent to edge `e` at vertex `v`, as directions from `v`.
    pub fn edge_corner_dirs(&self, e: usize, v: usize) -> [u8; 2] {
        let edge = self.edges[e];
        let d = if v == edge.from { edge.dir } else { edge.dir + 4 };
        [(d + 1) % 8, (d + 7) % 8]
    }

    /// Lattice vertex and direction of the decorated edge attaching `site`.
    pub fn site_anchor(&self, site: Site) -> (usize, u8) {
        match site {
            Site::Corner { vertex, dir } => (vertex, dir),
            Site::Normal(n) => (self.normals[n].vertex, self.normals[n].dir),
            Site::Mid(e) => (self.edges[e].from, self.edges[e].dir),
        }
    }

    /// Position in lattice units (multiply by the mesh for physical units).
    pub fn site_point(&self, site: Site) -> (f64, f64) {
        let (v, d) = self.site_anchor(site);
        let p = self.vertices[v];
        let s = step(d);
        let scale = if d % 2 == 0 { 0.5 } else { 0.25 };
        (
            f64::from(p.0) + scale * f64::from(s.0),
            f64::from(p.1) + scale * f64::from(s.1),
        )
    }

    /// Physical position as a complex number.
    pub fn site_position(&self, site: Site) -> Complex64 {
        let (x, y) = self.site_point(site);
        Complex64::new(x * self.mesh, y * self.mesh)
    }

    pub fn vertex_position(&self, v: usize) -> Complex64 {
        let p = self.vertices[v];
        Complex64::new(f64::from(p.0) * self.mesh, f64::from(p.1) * self.mesh)
    }

    /// Line of a corner or normal; `None` for edge midpoints.
    pub fn site_eta(&self, site: Site) -> Option<Complex64> {
        match site {
            Site::Corner { dir, .. } => Some(eta_from_angle(dir_angle(dir))),
            Site::Normal(n) => Some(self.normals[n].eta()),
            Site::Mid(_) => None,
        }
    }

    /// Counterclockwise angle increment of the normal lift from normal `i` to normal `j`.
    pub fn normal_lift(&self, i: usize, j: usize) -> f64 {
        let (ti, tj) = (self.normals[i].theta, self.normals[j].theta);
        if j >= i {
            tj - ti
        } else {
            tj - ti + 2.0 * PI
        }
    }

    /// Total turning of the outer normals over one loop.
    pub fn normal_total_turning(&self) -> f64 {
        let last = self.normals.last().expect("domain has outer normals");
        let first = &self.normals[0];
        last.theta + f64::from(turn(last.dir, first.dir)) * PI / 4.0 - first.theta
    }
}

fn check_connected(faces: &[Point], set: &HashSet<Point>) -> Result<()> {
    let mut seen: HashSet<Point> = HashSet::new();
    let mut queue = VecDeque::from([faces[0]]);
    seen.insert(faces[0]);
    while let Some(p) = queue.pop_front() {
        for d in [0u8, 2, 4, 6] {
            let q = offset(p, d);
            if set.contains(&q) && seen.insert(q) {
                queue.push_back(q);
            }
        }
    }
    if seen.len() != faces.len() {
        return Err(IflError::InvalidDomain("faces are not connected".into()));
    }
    Ok(())
}

/// All fixed polyominoes with `n` cells, translated to touch the axes.
pub fn fixed_polyominoes(n: usize) -> Vec<Vec<Point>> {
    let mut current: HashSet<Vec<Point>> = HashSet::from([vec![(0, 0)]]);
    for _ in 1..n {
        let mut next = HashSet::new();
        for shape in &current {
            let set: HashSet<Point> = shape.iter().copied().collect();
            for &p in shape {
                for d in [0u8, 2, 4, 6] {
                    let q = offset(p, d);
                    if set.contains(&q) {
                        continue;
                    }
                    let mut grown = shape.clone();
                    grown.push(q);
                    next.insert(normalize(grown));
                }
            }
        }
        current = next;
    }
    let mut out: Vec<Vec<Point>> = current.into_iter().collect();
    out.sort();
    out
}

fn normalize(mut cells: Vec<Point>) -> Vec<Point> {
    let mx = cells.iter().map(|p| p.0).min().unwrap_or(0);
    let my = cells.iter().map(|p| p.1).min().unwrap_or(0);
    for c in &mut cells {
        *c = (c.0 - mx, c.1 - my);
    }
    cells.sort();
    cells
}
