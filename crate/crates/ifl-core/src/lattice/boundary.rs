use serde::{Deserialize, Serialize};

use super::{Domain, NormalKind, Point};
use crate::{IflError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Plus,
    Minus,
    Free,
}

impl Label {
    pub fn spin(self) -> Option<i8> {
        match self {
            Label::Plus => Some(1),
            Label::Minus => Some(-1),
            Label::Free => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub label: Label,
    pub from: Point,
    pub to: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<i8>,
}

/// Domain description as read from JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<(i32, i32)>,
    #[serde(default)]
    pub arcs: Vec<ArcSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<Point>,
}

impl DomainSpec {
    pub fn domain(&self) -> Result<Domain> {
        let mesh = self.mesh.unwrap_or(1.0);
        match (&self.faces, self.rect) {
            (Some(f), None) => Domain::from_faces(f, mesh),
            (None, Some((w, h))) => Domain::rectangle(w, h, mesh),
            _ => Err(IflError::InvalidDomain(
                "exactly one of `faces` and `rect` is required".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<(Domain, BoundaryConditions)> {
        let dom = self.domain()?;
        let bc = BoundaryConditions::from_arcs(&dom, &self.arcs, self.a1)?;
        Ok((dom, bc))
    }
}

/// A marked boundary vertex together with its chosen outer normal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Marked {
    pub boundary_index: usize,
    pub vertex: usize,
    pub normal: usize,
}

/// Boundary arcs with labels, the induced outer spins and the marked points.
///
/// Arc `i` runs counterclockwise from mark `i` to mark `i + 1`. The source
/// points `a` list the spin changes: `a[0]` is where the tracked interface
/// starts and the last entry coincides with the closing endpoint of the last
/// free arc. The free arcs are `[b[2i], b[2i + 1]]`.
#[derive(Clone, Debug)]
pub struct BoundaryConditions {
    marks: Vec<usize>,
    labels: Vec<Label>,
    spins: Vec<i8>,
    edge_arc: Vec<Option<usize>>,
    a: Vec<Marked>,
    b: Vec<Marked>,
    m: usize,
    zeta: Vec<i8>,
}

impl BoundaryConditions {
    pub fn from_arcs(dom: &Domain, arcs: &[ArcSpec], a1: Option<Point>) -> Result<Self> {
        let n = arcs.len();
        if n < 2 {
            return Err(IflError::InvalidBc("need at least two arcs".into()));
        }
        let mut marks = Vec::with_capacity(n);
        for (i, arc) in arcs.iter().enumerate() {
            let next = &arcs[(i + 1) % n];
            if arc.to != next.from {
                return Err(IflError::InvalidBc(format!(
                    "arc {i} ends at {:?} but arc {} starts at {:?}",
                    arc.to,
                    (i + 1) % n,
                    next.from
                )));
            }
            marks.push(boundary_index(dom, arc.from)?);
        }
        let labels: Vec<Label> = arcs.iter().map(|a| a.label).collect();
        let spins: Vec<Option<i8>> = arcs.iter().map(|a| a.spin).collect();
        let a1 = a1.map(|p| boundary_index(dom, p)).transpose()?;
        Self::new(dom, &marks, &labels, &spins, a1)
    }

    /// Marks are boundary-walk indices in counterclockwise order.
    pub fn new(
        dom: &Domain,
        marks: &[usize],
        labels: &[Label],
        spins: &[Option<i8>],
        a1: Option<usize>,
    ) -> Result<Self> {
        let n = marks.len();
        let len = dom.boundary().len();
        if n < 2 || labels.len() != n || spins.len() != n {
            return Err(IflError::InvalidBc(
                "marks, labels and spins must have equal length of at least two".into(),
            ));
        }
        let mut total = 0;
        for i in 0..n {
            if marks[i] >= len {
                return Err(IflError::InvalidBc(format!("mark {} off the boundary", marks[i])));
            }
            let gap = (marks[(i + 1) % n] + len - marks[i]) % len;
            if gap == 0 {
                return Err(IflError::InvalidBc("repeated mark".into()));
            }
            total += gap;
        }
        if total != len {
            return Err(IflError::InvalidBc(
                "marks are not in counterclockwise order".into(),
            ));
        }
        for i in 0..n {
            if labels[i] == Label::Free && labels[(i + 1) % n] == Label::Free {
                return Err(IflError::InvalidBc("adjacent free arcs".into()));
            }
        }

        let mut arc_spins = Vec::with_capacity(n);
        for i in 0..n {
            let s = match (labels[i].spin(), spins[i]) {
                (Some(s), None) => s,
                (Some(s), Some(t)) if s == t => s,
                (Some(_), Some(_)) => {
                    return Err(IflError::InvalidBc(format!(
                        "arc {i} spin contradicts its label"
                    )))
                }
                (None, Some(t)) if t == 1 || t == -1 => t,
                (None, Some(t)) => {
                    return Err(IflError::InvalidBc(format!("free spin {t} is not +-1")))
                }
                (None, None) => -labels[(i + 1) % n].spin().expect("no adjacent free arcs"),
            };
            arc_spins.push(s);
        }

        let mut edge_arc = vec![None; dom.edges().len()];
        for i in 0..n {
            let mut j = marks[i];
            while j != marks[(i + 1) % n] {
                edge_arc[dom.boundary()[j].out_edge] = Some(i);
                j = (j + 1) % len;
            }
        }

        // mark i separates arc i-1 from arc i
        let is_a = |i: usize| arc_spins[(i + n - 1) % n] != arc_spins[i];
        let is_pm = |i: usize| labels[(i + n - 1) % n] != Label::Free && labels[i] != Label::Free;
        let free_arcs: Vec<usize> = (0..n).filter(|&i| labels[i] == Label::Free).collect();
        let last_free = *free_arcs
            .iter()
            .rev()
            .find(|&&i| is_a((i + 1) % n))
            .ok_or_else(|| {
                IflError::InvalidBc(
                    "no free arc whose counterclockwise end is a spin change".into(),
                )
            })?;
        let closing_mark = (last_free + 1) % n;
        let ordered_free: Vec<usize> = (1..=n)
            .map(|t| (last_free + t) % n)
            .filter(|&i| labels[i] == Label::Free)
            .collect();

        let mut b = Vec::with_capacity(2 * ordered_free.len());
        for &i in &ordered_free {
            b.push(mark_with_corner(dom, marks[i], true)?);
            b.push(mark_with_corner(dom, marks[(i + 1) % n], false)?);
        }

        let a_marks: Vec<usize> = (0..n).filter(|&i| is_a(i)).collect();
        let m = a_marks.iter().filter(|&&i| is_pm(i)).count();
        let first = match a1 {
            Some(bi) => {
                let i = marks.iter().position(|&x| x == bi).ok_or_else(|| {
                    IflError::InvalidBc("requested interface start is not a mark".into())
                })?;
                if !is_a(i) || i == closing_mark || (m > 0 && !is_pm(i)) {
                    return Err(IflError::InvalidBc(
                        "requested interface start is not an admissible spin change".into(),
                    ));
                }
                i
            }
            None => *a_marks
                .iter()
                .find(|&&i| if m > 0 { is_pm(i) } else { i != closing_mark })
                .ok_or_else(|| IflError::InvalidBc("fewer than two spin changes".into()))?,
        };
        let mut a_order = vec![first];
        a_order.extend(
            (1..n)
                .map(|t| (first + t) % n)
                .filter(|&i| is_a(i) && i != closing_mark),
        );
        a_order.push(closing_mark);
        let a = a_order
            .iter()
            .map(|&i| mark_with_edge_normal(dom, marks[i]))
            .collect::<Result<Vec<_>>>()?;

        let b_type_sources: Vec<usize> = a_order[..a_order.len() - 1]
            .iter()
            .copied()
            .filter(|&i| !is_pm(i))
            .map(|i| marks[i])
            .collect();
        let k = ordered_free.len();
        let zeta = (0..k.saturating_sub(1))
            .map(|i| {
                let c = [b[2 * i], b[2 * i + 1]]
                    .iter()
                    .filter(|x| b_type_sources.contains(&x.boundary_index))
                    .count();
                if c % 2 == 0 {
                    1
                } else {
                    -1
                }
            })
            .collect();

        Ok(BoundaryConditions {
            marks: marks.to_vec(),
            labels: labels.to_vec(),
            spins: arc_spins,
            edge_arc,
            a,
            b,
            m,
            zeta,
        })
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Spin of the outer faces along each arc, free arcs included.
    pub fn arc_spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn a(&self) -> &[Marked] {
        &self.a
    }

    pub fn b(&self) -> &[Marked] {
        &self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.b.len() / 2
    }

    pub fn s(&self) -> usize {
        self.a.len() - self.m
    }

    /// Signs relating the two ends of the first k-1 free arcs.
    pub fn zeta(&self) -> &[i8] {
        &self.zeta
    }

    pub fn edge_arc(&self, e: usize) -> Option<usize> {
        self.edge_arc[e]
    }

    pub fn is_free_edge(&self, e: usize) -> bool {
        self.edge_arc[e].is_some_and(|i| self.labels[i] == Label::Free)
    }

    /// Outer spin across a boundary edge; `None` for interior edges.
    pub fn outer_spin(&self, e: usize) -> Option<i8> {
        self.edge_arc[e].map(|i| self.spins[i])
    }

    /// Outer normals carrying the sources of the observable.
    pub fn source_normals(&self) -> Vec<usize> {
        self.a[..self.a.len() - 1].iter().map(|x| x.normal).collect()
    }

    /// Corner normal at the closing end of the last free arc.
    pub fn closing_normal(&self) -> usize {
        self.b[self.b.len() - 1].normal
    }

    /// True when both boundary edges at `v` are free.
    pub fn vertex_strictly_free(&self, dom: &Domain, v: usize) -> bool {
        match dom.boundary_index_of_vertex(v) {
            None => false,
            Some(i) => {
                let bv = &dom.boundary()[i];
                let len = dom.boundary().len();
                let prev = dom.boundary()[(i + len - 1) % len].out_edge;
                self.is_free_edge(bv.out_edge) && self.is_free_edge(prev)
            }
        }
    }

    /// Mask of lattice edges lying on free arcs.
    pub fn free_mask(&self, dom: &Domain) -> Vec<bool> {
        (0..dom.edges().len()).map(|e| self.is_free_edge(e)).collect()
    }
}

fn boundary_index(dom: &Domain, p: Point) -> Result<usize> {
    dom.vertex_id(p)
        .and_then(|v| dom.boundary_index_of_vertex(v))
        .ok_or_else(|| IflError::InvalidBc(format!("{p:?} is not a boundary vertex")))
}

fn mark_with_edge_normal(dom: &Domain, bi: usize) -> Result<Marked> {
    let bv = &dom.boundary()[bi];
    let normal = bv
        .normals
        .clone()
        .find(|&n| dom.normals()[n].kind() == NormalKind::Edge)
        .ok_or_else(|| {
            IflError::InvalidBc(format!(
                "marked vertex {:?} is concave and has no outer edge normal",
                dom.vertices()[bv.vertex]
            ))
        })?;
    Ok(Marked {
        boundary_index: bi,
        vertex: bv.vertex,
        normal,
    })
}

/// Corner normal next to the fixed-spin side: the first one when the fixed arc
/// precedes the mark, the last one otherwise.
fn mark_with_corner(dom: &Domain, bi: usize, fixed_before: bool) -> Result<Marked> {
    let bv = &dom.boundary()[bi];
    let normal = if fixed_before {
        bv.normals.start
    } else {
        bv.normals.end - 1
    };
    debug_assert_eq!(dom.normals()[normal].kind(), NormalKind::Corner);
    Ok(Marked {
        boundary_index: bi,
        vertex: bv.vertex,
        normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(label: Label, from: Point, to: Point) -> ArcSpec {
        ArcSpec {
            label,
            from,
            to,
            spin: None,
        }
    }

    #[test]
    fn three_arc_marks() {
        let dom = Domain::rectangle(4, 4, 0.25).unwrap();
        let arcs = vec![
            arc(Label::Minus, (2, 0), (4, 2)),
            arc(Label::Free, (4, 2), (0, 2)),
            arc(Label::Plus, (0, 2), (2, 0)),
        ];
        let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
        assert_eq!((bc.m(), bc.k(), bc.s()), (1, 1, 1));
        let v = |i: usize| dom.vertices()[bc.a()[i].vertex];
        assert_eq!(v(0), (2, 0));
        // free arc spin defaults to minus the following label
        assert_eq!(bc.arc_spins(), &[-1, -1, 1]);
        assert_eq!(v(1), (0, 2));
        assert_eq!(dom.vertices()[bc.b()[0].vertex], (4, 2));
        assert_eq!(dom.vertices()[bc.b()[1].vertex], (0, 2));
        assert_eq!(bc.source_normals().len(), 1);
    }

    #[test]
    fn four_marks_two_free() {
        let dom = Domain::rectangle(3, 3, 1.0).unwrap();
        let arcs = vec![
            arc(Label::Plus, (0, 3), (0, 0)),
            arc(Label::Free, (0, 0), (3, 0)),
            arc(Label::Plus, (3, 0), (3, 3)),
            arc(Label::Free, (3, 3), (0, 3)),
        ];
        let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
        assert_eq!((bc.m(), bc.k(), bc.s()), (0, 2, 4));
        assert_eq!(bc.zeta().len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let dom = Domain::rectangle(3, 3, 1.0).unwrap();
        let free_free = vec![
            arc(Label::Free, (0, 0), (3, 0)),
            arc(Label::Free, (3, 0), (0, 0)),
        ];
        assert!(BoundaryConditions::from_arcs(&dom, &free_free, None).is_err());
        let gap = vec![
            arc(Label::Plus, (0, 0), (3, 0)),
            arc(Label::Free, (3, 3), (0, 0)),
        ];
        assert!(BoundaryConditions::from_arcs(&dom, &gap, None).is_err());
        let cw = vec![
            arc(Label::Plus, (0, 0), (0, 3)),
            arc(Label::Minus, (0, 3), (3, 3)),
            arc(Label::Free, (3, 3), (0, 0)),
        ];
        assert!(BoundaryConditions::from_arcs(&dom, &cw, None).is_err());
    }
}
