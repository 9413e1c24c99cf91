use anyhow::Result;
use clap::{Args, Subcommand};
use ifl_core::conformal::RectangleMap;
use ifl_core::crossing::{fk_crossing_continuum, spin_crossing_prediction, CrossingQuery, GFunction, GKind, DEFAULT_G_NODES};
use ifl_core::lattice::{ArcSpec, BoundaryConditions, Domain, Label, Point};
use ifl_core::lowtemp::{sample_spins, spin_crossing, wired_arc_edges, SpinBoundary};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{Ctx, Outcome};
use crate::config::{input_error, parse_point, parse_rect};
use crate::emit::{num, Output};

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingCmd {
    /// Continuum FK probability that the chosen wired arcs share a cluster.
    Fk(FkArgs),
    /// Crossing functions G(lambda) by Gauss-Jacobi rules and by adaptive quadrature (CSV).
    G(GArgs),
    /// Spin crossing frequencies on a rectangle against the continuum prediction.
    Spin(SpinArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct FkArgs {
    /// Real points listed in increasing order; arcs [x1,x2], [x3,x4], ... are wired.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub points: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub subset: Vec<usize>,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct GArgs {
    /// pmpf, pmpm or pmff.
    #[arg(long, default_value = "pmpf")]
    pub kind: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_G_NODES)]
    pub nodes: usize,
}

/// `+` on (a1 b1) and (b2 a2), free on (b1 b2), `-` on (a2 a1).
#[derive(Args, Clone, Debug, Serialize)]
pub struct SpinArgs {
    #[arg(long, value_parser = parse_rect)]
    pub rect: (i32, i32),
    /// Boundary vertices a1,b1,b2,a2 as x:y, counterclockwise.
    #[arg(long, value_delimiter = ',', value_parser = parse_point, required = true)]
    pub points: Vec<Point>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Independent chains, each seeded from --seed and its index.
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
}

impl CrossingCmd {
    pub fn run(&self, ctx: &Ctx) -> Result<Vec<Outcome>> {
        match self {
            CrossingCmd::Fk(a) => {
                let q = CrossingQuery::new(a.points.clone(), a.subset.clone())?;
                let fk = fk_crossing_continuum(&q)?;
                Ok(vec![Outcome::new("crossing-fk", Output::json(fk)?)])
            }
            CrossingCmd::G(a) => {
                let kind: GKind = a.kind.parse().map_err(|e: ifl_core::IflError| input_error(e.to_string()))?;
                let g = GFunction::with_nodes(kind, a.nodes)?;
                let mut out = Output::csv(&["lambda", "jacobi", "adaptive"]);
                for &l in &a.lambda {
                    out.push(vec![num(l), num(g.eval(l)?), num(g.eval_adaptive(l, 1e-12)?)]);
                }
                Ok(vec![Outcome::new("crossing-g", out)])
            }
            CrossingCmd::Spin(a) => spin(a, ctx),
        }
    }
}

fn spin(a: &SpinArgs, ctx: &Ctx) -> Result<Vec<Outcome>> {
    let [a1, b1, b2, a2]: [Point; 4] = a
        .points
        .clone()
        .try_into()
        .map_err(|_| input_error("--points needs exactly a1,b1,b2,a2"))?;
    if a.count == 0 || a.chains == 0 {
        return Err(input_error("--count and --chains must be positive"));
    }
    let (w, h) = a.rect;
    let dom = Domain::rectangle(w, h, 1.0)?;
    let arcs = [
        ArcSpec { label: Label::Plus, from: a1, to: b1, spin: None },
        ArcSpec { label: Label::Free, from: b1, to: b2, spin: None },
        ArcSpec { label: Label::Plus, from: b2, to: a2, spin: None },
        ArcSpec { label: Label::Minus, from: a2, to: a1, spin: None },
    ];
    let bc = BoundaryConditions::from_arcs(&dom, &arcs, Some(a1))?;
    let sb = SpinBoundary::from_bc(&dom, &bc);
    let edges = wired_arc_edges(&dom, &[a1, b1, b2, a2])?;
    let per_chain = a.count.div_ceil(a.chains);
    let hits: Vec<(usize, usize)> = (0..a.chains)
        .into_par_iter()
        .map(|c| -> ifl_core::Result<(usize, usize)> {
            let s = sample_spins(&dom, &sb, per_chain, ctx.seed.wrapping_add(c as u64))?;
            let plus = s.samples.iter().filter(|sp| spin_crossing(&dom, sp, &edges[0], &edges[1], 1)).count();
            Ok((plus, s.samples.len()))
        })
        .collect::<ifl_core::Result<_>>()?;
    let (plus, n) = hits.iter().fold((0, 0), |acc, &(p, m)| (acc.0 + p, acc.1 + m));
    let freq = plus as f64 / n as f64;
    let map = RectangleMap::new(f64::from(w), f64::from(h))?;
    let pos = |p: Point| ifl_core::Complex64::new(f64::from(p.0), f64::from(p.1));
    let g = GFunction::new(GKind::Pmpf)?;
    let (pred_plus, pred_minus) = spin_crossing_prediction(&map, pos(a1), pos(b1), pos(b2), pos(a2), &g)?;
    let out = Output::json(json!({
        "samples": n,
        "plus_crossing": freq,
        "stderr_iid": (freq * (1.0 - freq) / n as f64).sqrt(),
        "predicted_plus": pred_plus,
        "predicted_minus": pred_minus,
    }))?;
    Ok(vec![Outcome::new("crossing-spin", out)])
}
