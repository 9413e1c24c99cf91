use super::checks::*;
use super::*;
use crate::lattice::{ArcSpec, Label, Point, X_CRIT};
use approx::assert_relative_eq;
use proptest::prelude::*;

fn arc(label: Label, from: Point, to: Point) -> ArcSpec {
    ArcSpec { label, from, to, spin: None }
}

fn three_arc_3x3() -> (Domain, BoundaryConditions) {
    let dom = Domain::rectangle(3, 3, 1.0).unwrap();
    let arcs = vec![
        arc(Label::Minus, (1, 0), (3, 2)),
        arc(Label::Free, (3, 2), (0, 2)),
        arc(Label::Plus, (0, 2), (1, 0)),
    ];
    let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
    (dom, bc)
}

fn two_free_3x3() -> (Domain, BoundaryConditions) {
    let dom = Domain::rectangle(3, 3, 1.0).unwrap();
    let arcs = vec![
        arc(Label::Plus, (0, 3), (0, 0)),
        arc(Label::Free, (0, 0), (3, 0)),
        arc(Label::Plus, (3, 0), (3, 3)),
        arc(Label::Free, (3, 3), (0, 3)),
    ];
    let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
    (dom, bc)
}

fn mixed_3x3() -> (Domain, BoundaryConditions) {
    let dom = Domain::rectangle(3, 3, 0.5).unwrap();
    let arcs = vec![
        arc(Label::Plus, (0, 3), (0, 0)),
        arc(Label::Minus, (0, 0), (2, 0)),
        arc(Label::Free, (2, 0), (3, 1)),
        arc(Label::Plus, (3, 1), (3, 3)),
        arc(Label::Free, (3, 3), (0, 3)),
    ];
    let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
    (dom, bc)
}

fn fixtures() -> Vec<(Domain, BoundaryConditions)> {
    vec![three_arc_3x3(), two_free_3x3(), mixed_3x3()]
}

#[test]
fn one_face_against_hand_enumeration() {
    // plus on the left, minus along the bottom, free on the right and top:
    // the only curves from (0,0) to (1,1) run along the bottom and right, or
    // along the left and top, each with one weighted and one free edge.
    let dom = Domain::rectangle(1, 1, 1.0).unwrap();
    let arcs = vec![
        arc(Label::Plus, (0, 1), (0, 0)),
        arc(Label::Minus, (0, 0), (1, 0)),
        arc(Label::Free, (1, 0), (0, 1)),
    ];
    let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
    let v11 = dom.vertex_id((1, 1)).unwrap();
    let z = dom.normal_at(v11, 1).unwrap();
    let x = X_CRIT;
    let stubs = x.sqrt() * x.sqrt() * (std::f64::consts::PI / 8.0).cos();
    let hand = stubs * (x + x);
    let f = observable(&dom, &bc, Site::Normal(z)).unwrap();
    assert_relative_eq!(f.norm(), hand, max_relative = 1e-14);
    let eta = boundary_eta(&dom, &bc)[z];
    assert!((f + eta * hand).norm() < 1e-14);
}

#[test]
fn boundary_identity_on_fixtures() {
    for (dom, bc) in fixtures() {
        let ctx = ObservableContext::new(&dom, &bc).unwrap();
        let raw = ctx.compute().unwrap();
        let rep = boundary_identity_check(&ctx, &raw).unwrap();
        assert!(rep.checked > 30);
        assert!(rep.relative() < 1e-12, "{rep:?}");
    }
}

#[test]
fn closing_normal_magnitude_is_the_partition_function() {
    let (dom, bc) = three_arc_3x3();
    let ctx = ObservableContext::new(&dom, &bc).unwrap();
    let f = ctx.value(Site::Normal(bc.closing_normal())).unwrap();
    let z = ctx.closing_partition_function().unwrap();
    assert_relative_eq!(f.norm(), z, max_relative = 1e-13);
    let norm = compute_normalized(&dom, &bc).unwrap();
    let fb = norm.get(Site::Normal(bc.closing_normal())).unwrap();
    assert_relative_eq!(fb.norm() * (SQRT_2 * dom.mesh()).sqrt(), 1.0, epsilon = 1e-13);
}

#[test]
fn multi_arc_corners_are_collinear() {
    let dom = Domain::rectangle(2, 2, 1.0).unwrap();
    let arcs = vec![
        arc(Label::Plus, (0, 2), (0, 0)),
        arc(Label::Free, (0, 0), (2, 0)),
        arc(Label::Plus, (2, 0), (2, 2)),
        arc(Label::Free, (2, 2), (0, 2)),
    ];
    let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
    assert!(bc.source_normals().len() > 1);
    let obs = compute_observable(&dom, &bc).unwrap();
    let scale = obs.max_abs();
    assert!(scale > 0.0);
    for (&site, &v) in &obs.values {
        if let Some(eta) = dom.site_eta(site) {
            assert!((v * eta.conj()).im.abs() < 1e-13 * scale, "{site:?}");
        }
    }
}

#[test]
fn refuses_free_midpoints_and_sources() {
    let (dom, bc) = three_arc_3x3();
    let free = (0..dom.edges().len()).find(|&e| bc.is_free_edge(e)).unwrap();
    let fixed = (0..dom.edges().len()).find(|&e| !bc.is_free_edge(e)).unwrap();
    assert!(observable(&dom, &bc, Site::Mid(free)).is_err());
    let src = bc.source_normals()[0];
    assert!(observable(&dom, &bc, Site::Normal(src)).is_err());
    let obs = compute_observable(&dom, &bc).unwrap();
    assert!(extend_to_free(&dom, &bc, &obs, fixed).is_err());
}

#[test]
fn shol_holds_and_locates_corruption() {
    for (dom, bc) in fixtures() {
        let obs = compute_observable(&dom, &bc).unwrap();
        let rep = shol_check(&dom, &bc, &obs);
        assert!(rep.relative() < 1e-12, "{rep:?}");
    }
    let (dom, bc) = three_arc_3x3();
    let mut obs = compute_observable(&dom, &bc).unwrap();
    let v = dom.vertex_id((1, 1)).unwrap();
    let bad = Site::Corner { vertex: v, dir: 1 };
    *obs.values.get_mut(&bad).unwrap() *= 1.5;
    let tol = 1e-12 * obs.max_abs();
    let hits: Vec<_> = shol_defects(&dom, &bc, &obs)
        .into_iter()
        .filter(|d| d.2 > tol)
        .collect();
    // the two edges at the corner's vertex that bound its face
    assert_eq!(hits.len(), 2);
    assert!(hits.iter().all(|d| d.1 == bad));
}

#[test]
fn shol_scan_skips_free_midpoints() {
    let (dom, bc) = three_arc_3x3();
    let obs = compute_observable(&dom, &bc).unwrap();
    assert!(shol_defects(&dom, &bc, &obs)
        .iter()
        .all(|(z, _, _)| !matches!(z, Site::Mid(e) if bc.is_free_edge(*e))));
}

#[test]
fn free_extension_line_and_rotation() {
    for (dom, bc) in fixtures() {
        let obs = compute_observable(&dom, &bc).unwrap();
        let rep = free_checks(&dom, &bc, &obs).unwrap();
        assert!(rep.line.checked > 0);
        assert!(rep.line.relative() < 1e-12, "{rep:?}");
        assert!(rep.rotation.relative() < 1e-12, "{rep:?}");
    }
}

#[test]
fn symmetric_marks_give_symmetric_free_values() {
    let dom = Domain::rectangle(2, 2, 1.0).unwrap();
    let arcs = vec![
        arc(Label::Minus, (1, 0), (2, 2)),
        arc(Label::Free, (2, 2), (0, 2)),
        arc(Label::Plus, (0, 2), (1, 0)),
    ];
    let bc = BoundaryConditions::from_arcs(&dom, &arcs, None).unwrap();
    let obs = compute_observable(&dom, &bc).unwrap();
    let top = |x: i32| {
        let v = dom.vertex_id((x, 2)).unwrap();
        dom.edge_from(v, 0).unwrap()
    };
    let l = extend_to_free(&dom, &bc, &obs, top(0)).unwrap();
    let r = extend_to_free(&dom, &bc, &obs, top(1)).unwrap();
    assert_relative_eq!(l.norm(), r.norm(), max_relative = 1e-12);
}

#[test]
fn plaquette_and_jump_identities() {
    for (dom, bc) in fixtures() {
        let obs = compute_observable(&dom, &bc).unwrap();
        let p = plaquette_check(&dom, &bc, &obs);
        assert!(p.checked > 10);
        assert!(p.relative() < 1e-12, "{p:?}");
        let j = jump_check(&bc, &obs);
        assert!(j.relative() < 1e-12, "{j:?}");
    }
    let (_, bc) = two_free_3x3();
    let obs = compute_observable(&two_free_3x3().0, &bc).unwrap();
    assert!(jump_check(&bc, &obs).checked >= 1);
}

#[test]
fn h_is_well_defined_with_expected_boundary_values() {
    for (dom, bc) in fixtures() {
        let obs = compute_normalized(&dom, &bc).unwrap();
        let h = build_h(&dom, &bc, &obs, None).unwrap();
        assert!(h.closure_defect < 1e-10, "{:?}", h.worst_link);
        let b = h_boundary_report(&dom, &bc, &h);
        assert!(b.outer_faces < 1e-10);
        assert!(b.free_spread < 1e-10);
        assert!((b.closing_constant - 1.0).abs() < 1e-10);
        assert!(b.min_fixed_vertex >= -1e-10);
        assert!(b.max_free_face_excess <= 1e-10);
        assert!(b.free_constants.values().all(|&c| c >= -1e-10));
        let inc = increment_check(&dom, &bc, &obs, &h);
        assert!(inc.max_defect < 1e-10, "{inc:?}");
    }
}

#[test]
fn base_face_change_shifts_by_a_constant() {
    let (dom, bc) = mixed_3x3();
    let obs = compute_normalized(&dom, &bc).unwrap();
    let h0 = build_h(&dom, &bc, &obs, None).unwrap();
    let other: Point = (1, 1);
    let h1 = build_h(&dom, &bc, &obs, Some(other)).unwrap();
    let shift = h0.face(other).unwrap();
    for (v, (a, b)) in h0.h_vertices.iter().zip(&h1.h_vertices).enumerate() {
        assert!((a - b - shift).abs() < 1e-12, "vertex {v}");
    }
    for (p, a) in &h0.h_faces {
        assert!((a - h1.face(*p).unwrap() - shift).abs() < 1e-12);
    }
}

#[test]
fn modified_laplacian_signs_and_corner_formula() {
    for (dom, bc) in fixtures() {
        let obs = compute_normalized(&dom, &bc).unwrap();
        let h = build_h(&dom, &bc, &obs, None).unwrap();
        let rep = laplacian_check(&dom, &bc, &obs, &h, 1e-10);
        assert!(rep.vertex_violations.is_empty(), "{rep:?}");
        assert!(rep.face_violations.is_empty(), "{rep:?}");
        assert_eq!(rep.faces_checked, dom.faces().len());
        assert!(rep.corner_formula.max_defect < 1e-10, "{:?}", rep.corner_formula);
        let a1 = dom.vertices()[bc.a()[0].vertex];
        if bc.m() > 0 {
            assert!(rep.skipped.contains(&a1));
        }
    }
}

#[test]
fn bvp_matches_enumeration() {
    for (dom, bc) in fixtures() {
        let exact = compute_normalized(&dom, &bc).unwrap();
        let sol = bvp::solve(&dom, &bc).unwrap();
        assert_eq!(sol.unknowns, sol.equations);
        let mut compared = 0;
        for (site, v) in &sol.observable.values {
            if let Some(x) = exact.get(*site) {
                compared += 1;
                assert!((x - v).norm() < 1e-10 * exact.max_abs(), "{site:?}");
            }
        }
        assert!(compared > 50);
    }
}

#[test]
fn winding_invariant_under_resolution() {
    let (dom, bc) = mixed_3x3();
    let right = ObservableContext::new(&dom, &bc).unwrap();
    let left = ObservableContext::new(&dom, &bc)
        .unwrap()
        .with_resolution(Resolution::TurnLeft);
    for site in right.sites() {
        let (a, b) = (right.value(site).unwrap(), left.value(site).unwrap());
        assert!((a - b).norm() < 1e-13, "{site:?}");
    }
}

/// Random boundary conditions with three to five marks on small polyominoes.
fn random_case() -> impl Strategy<Value = (Vec<Point>, Vec<usize>, Vec<Label>)> {
    (1usize..=5, any::<u64>(), 3usize..=5, prop::collection::vec(0u8..3, 5)).prop_map(
        |(size, pick, nmarks, labels)| {
            let polys = crate::lattice::fixed_polyominoes(size);
            let faces = polys[(pick as usize) % polys.len()].clone();
            let dom = Domain::from_faces(&faces, 1.0).unwrap();
            let len = dom.boundary().len();
            let mut marks: Vec<usize> = (0..nmarks)
                .map(|i| ((pick >> (8 + 6 * i)) as usize) % len)
                .collect();
            marks.sort_unstable();
            marks.dedup();
            let labels = labels[..marks.len()]
                .iter()
                .map(|l| [Label::Plus, Label::Minus, Label::Free][*l as usize])
                .collect();
            (faces, marks, labels)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn identities_hold_for_random_marks((faces, marks, labels) in random_case()) {
        let dom = Domain::from_faces(&faces, 1.0).unwrap();
        let spins = vec![None; marks.len()];
        let bc = BoundaryConditions::new(&dom, &marks, &labels, &spins, None);
        prop_assume!(bc.is_ok());
        let bc = bc.unwrap();
        let rep = verify_all(&dom, &bc, 1e-10).unwrap();
        prop_assert!(rep.shol.relative() < 1e-12);
        prop_assert!(rep.boundary_identity.relative() < 1e-12);
        prop_assert!(rep.winding_resolution.relative() < 1e-12);
        prop_assert!(rep.free.line.relative() < 1e-12);
        prop_assert!(rep.h.closure_defect < 1e-10);
        prop_assert!(rep.laplacian.vertex_violations.is_empty());
        prop_assert!(rep.laplacian.face_violations.is_empty());
        prop_assert!(rep.laplacian.corner_formula.max_defect < 1e-10);
    }
}
