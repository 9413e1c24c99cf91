use anyhow::Result;
use clap::{Args, Subcommand};
use ifl_core::disc_obs::ObservableContext;
use ifl_core::lattice::{Domain, Point};
use ifl_core::lowtemp::{fk_crossing_exact, restricted_partitions, sample_spins, spin_partition, SamplingMethod, SpinBoundary};
use serde::Serialize;
use serde_json::json;

use super::{Ctx, Outcome};
use crate::config::{self, parse_point, parse_rect, DomainArgs};
use crate::emit::Output;

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowtempCmd {
    /// Spin partition function and the normalizing loop partition function.
    Z(DomainArgs),
    /// FK crossing probability by exact summation over wired-arc spins.
    CrossingExact(CrossingArgs),
    /// Spin configurations under the boundary conditions (CSV, one row per face).
    Sample(SampleArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct CrossingArgs {
    /// Rectangle size in faces.
    #[arg(long, value_parser = parse_rect)]
    pub rect: (i32, i32),
    /// Boundary vertices x:y listed counterclockwise; arcs [p1,p2], [p3,p4], ... are wired.
    #[arg(long, value_delimiter = ',', value_parser = parse_point, required = true)]
    pub points: Vec<Point>,
    /// Arcs (0-based) that must share one cluster.
    #[arg(long, value_delimiter = ',', required = true)]
    pub subset: Vec<usize>,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}

impl LowtempCmd {
    pub fn run(&self, ctx: &Ctx) -> Result<Vec<Outcome>> {
        match self {
            LowtempCmd::Z(d) => {
                let (path, spec) = d.load()?;
                let (dom, bc) = config::build(&spec, &path)?;
                let sb = SpinBoundary::from_bc(&dom, &bc);
                let z_spins = spin_partition(&dom, &sb)?;
                let z_closing = ObservableContext::new(&dom, &bc)?.closing_partition_function()?;
                let out = Output::json(json!({
                    "faces": dom.faces().len(),
                    "edges": dom.edges().len(),
                    "z_spins": z_spins,
                    "z_closing": z_closing,
                }))?;
                Ok(vec![Outcome::new("lowtemp-z", out).with_input(path)])
            }
            LowtempCmd::CrossingExact(a) => {
                let (w, h) = a.rect;
                let dom = Domain::rectangle(w, h, 1.0)?;
                let value = fk_crossing_exact(&dom, &a.points, &a.subset)?;
                let sums = restricted_partitions(&dom, &a.points)?;
                let out = Output::json(json!({ "value": value, "restricted_partitions": sums }))?;
                Ok(vec![Outcome::new("lowtemp-crossing-exact", out)])
            }
            LowtempCmd::Sample(a) => {
                let (path, spec) = a.domain.load()?;
                let (dom, bc) = config::build(&spec, &path)?;
                let sb = SpinBoundary::from_bc(&dom, &bc);
                let samples = sample_spins(&dom, &sb, a.count, ctx.seed)?;
                let method = match samples.method {
                    SamplingMethod::Exact => "exact".to_string(),
                    SamplingMethod::Metropolis { burn_in_sweeps, thinning_sweeps } => {
                        format!("metropolis(burn_in={burn_in_sweeps},thinning={thinning_sweeps})")
                    }
                };
                let mut out = Output::csv(&["sample", "x", "y", "spin", "method"]);
                for (i, s) in samples.samples.iter().enumerate() {
                    for (f, &(x, y)) in dom.faces().iter().enumerate() {
                        out.push(vec![i.to_string(), x.to_string(), y.to_string(), s[f].to_string(), method.clone()]);
                    }
                }
                Ok(vec![Outcome::new("lowtemp-sample", out).with_input(path)])
            }
        }
    }
}
