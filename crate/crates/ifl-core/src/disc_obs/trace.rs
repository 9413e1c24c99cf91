//! Winding of the curve running through a configuration.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::lattice::{turn, Domain};
use crate::lowtemp::EdgeConfig;
use crate::{IflError, Result};

/// How strands are paired at a vertex visited more than once.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Resolution {
    /// Leave by the first free edge counterclockwise from the arrival edge.
    #[default]
    TurnRight,
    /// Leave by the first free edge clockwise from the arrival edge.
    TurnLeft,
}

/// Outer arcs joining source normals outside the domain, with their windings
/// in units of pi/4 for the traversal from key to partner.
#[derive(Clone, Debug, Default)]
pub struct OuterArcs {
    jumps: HashMap<(usize, u8), ((usize, u8), i32)>,
}

impl OuterArcs {
    /// Nested pairing of the given normals (first with last, and so on); each
    /// arc hugs the boundary counterclockwise from the earlier normal.
    pub fn nested(dom: &Domain, normals: &[usize]) -> Self {
        let mut jumps = HashMap::new();
        let n = normals.len();
        for i in 0..n / 2 {
            let (p, q) = (normals[i], normals[n - 1 - i]);
            let units = (dom.normal_lift(p, q) / (PI / 4.0)).round() as i32 + 4;
            let key = |k: usize| (dom.normals()[k].vertex, dom.normals()[k].dir);
            jumps.insert(key(p), (key(q), units));
            jumps.insert(key(q), (key(p), -units));
        }
        OuterArcs { jumps }
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }
}

/// Net rotation, in units of pi/4, of the curve that starts by entering the
/// domain through stub `start` and ends by leaving through stub `end`.
pub fn winding_units(
    dom: &Domain,
    cfg: &EdgeConfig,
    start: usize,
    end: usize,
    arcs: &OuterArcs,
    resolution: Resolution,
) -> Result<i32> {
    let stubs = &cfg.stubs;
    let mut used_edges = 0u128;
    let mut used_stubs = 1u32 << start;
    let (mut u, d0) = stubs[start];
    let mut d_in = (d0 + 4) % 8;
    let mut total = 0i32;
    let limit = 2 * cfg.lattice.count_ones() as usize + 2 * stubs.len() + 2;
    for _ in 0..limit {
        let back = (d_in + 4) % 8;
        let mut chosen = None;
        for j in 1..8u8 {
            let d = match resolution {
                Resolution::TurnRight => (back + j) % 8,
                Resolution::TurnLeft => (back + 8 - j) % 8,
            };
            if d % 2 == 0 {
                if let Some(e) = dom.edge_from(u, d) {
                    if cfg.lattice >> e & 1 == 1 && used_edges >> e & 1 == 0 {
                        chosen = Some((d, Step::Edge(e)));
                        break;
                    }
                }
            }
            if let Some(s) = (0..stubs.len()).find(|&s| stubs[s] == (u, d) && used_stubs >> s & 1 == 0) {
                chosen = Some((d, Step::Stub(s)));
                break;
            }
        }
        let (d, stepped) = chosen.ok_or_else(|| {
            IflError::InvalidArgument(format!(
                "curve dead-ends at vertex {:?}",
                dom.vertices()[u]
            ))
        })?;
        total += turn(d_in, d);
        match stepped {
            Step::Edge(e) => {
                used_edges |= 1 << e;
                u = dom.edges()[e].other(u);
                d_in = d;
            }
            Step::Stub(s) => {
                used_stubs |= 1 << s;
                if s == end {
                    return Ok(total);
                }
                let &(target, units) = arcs.jumps.get(&stubs[s]).ok_or_else(|| {
                    IflError::InvalidArgument("curve leaves through an unpaired stub".into())
                })?;
                let t = (0..stubs.len())
                    .find(|&t| stubs[t] == target && used_stubs >> t & 1 == 0)
                    .ok_or_else(|| IflError::InvalidArgument("outer arc partner missing".into()))?;
                used_stubs |= 1 << t;
                total += units;
                u = target.0;
                d_in = (target.1 + 4) % 8;
            }
        }
    }
    Err(IflError::InvalidArgument("curve does not terminate".into()))
}

enum Step {
    Edge(usize),
    Stub(usize),
}

/// e^{-i wind/2} for a winding of `units` multiples of pi/4.
pub fn half_angle_phase(units: i32) -> Complex64 {
    Complex64::from_polar(1.0, -f64::from(units) * PI / 8.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Domain;

    fn cfg(dom: &Domain, edges: &[((i32, i32), u8)], stubs: Vec<(usize, u8)>) -> EdgeConfig {
        let mut lattice = 0u128;
        for &(p, d) in edges {
            let e = dom.edge_from(dom.vertex_id(p).unwrap(), d).unwrap();
            lattice |= 1 << e;
        }
        EdgeConfig { lattice, stubs }
    }

    #[test]
    fn straight_path_has_no_winding() {
        let dom = Domain::rectangle(2, 1, 1.0).unwrap();
        let v = dom.vertex_id((1, 0)).unwrap();
        let c = cfg(&dom, &[], vec![(v, 4), (v, 0)]);
        let w = winding_units(&dom, &c, 0, 1, &OuterArcs::default(), Resolution::TurnRight);
        assert_eq!(w.unwrap(), 0);
    }

    #[test]
    fn corner_turn_is_quarter() {
        let dom = Domain::rectangle(1, 1, 1.0).unwrap();
        let v = dom.vertex_id((0, 0)).unwrap();
        let w = dom.vertex_id((1, 0)).unwrap();
        // enter (0,0) from the left, run east, turn north at (1,0)
        let c = cfg(&dom, &[((0, 0), 0)], vec![(v, 4), (w, 2)]);
        let units = winding_units(&dom, &c, 0, 1, &OuterArcs::default(), Resolution::TurnRight);
        assert_eq!(units.unwrap(), 2);
        let c = cfg(&dom, &[((0, 0), 0)], vec![(v, 4), (w, 6)]);
        let units = winding_units(&dom, &c, 0, 1, &OuterArcs::default(), Resolution::TurnRight);
        assert_eq!(units.unwrap(), -2);
    }

    #[test]
    fn positive_loop_through_outer_arc() {
        // Enter at the top left of a 2x1 strip heading down, leave through the
        // bottom left corner, travel once round the outside counterclockwise,
        // re-enter at the top middle and leave through the bottom middle.
        let dom = Domain::rectangle(2, 1, 1.0).unwrap();
        let id = |p: (i32, i32)| dom.vertex_id(p).unwrap();
        let out = dom.normal_at(id((0, 0)), 6).unwrap();
        let back_in = dom.normal_at(id((1, 1)), 2).unwrap();
        let arcs = OuterArcs::nested(&dom, &[out, back_in]);
        let c = cfg(
            &dom,
            &[((0, 0), 2), ((1, 0), 2)],
            vec![(id((0, 1)), 2), (id((0, 0)), 6), (id((1, 1)), 2), (id((1, 0)), 6)],
        );
        for res in [Resolution::TurnRight, Resolution::TurnLeft] {
            assert_eq!(winding_units(&dom, &c, 0, 3, &arcs, res).unwrap(), 8);
        }
    }

    #[test]
    fn dead_end_is_an_error() {
        let dom = Domain::rectangle(2, 1, 1.0).unwrap();
        let v = dom.vertex_id((1, 0)).unwrap();
        let w = dom.vertex_id((2, 0)).unwrap();
        let c = cfg(&dom, &[], vec![(v, 4), (w, 0)]);
        assert!(winding_units(&dom, &c, 0, 1, &OuterArcs::default(), Resolution::TurnRight).is_err());
    }
}
