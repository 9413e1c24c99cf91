use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use ifl_core::disc_obs::checks::verify_all;
use ifl_core::disc_obs::{bvp, ObservableContext};
use ifl_core::lattice::{Domain, Site};
use serde::Serialize;
use serde_json::json;

use super::{Ctx, Outcome};
use crate::config::{self, fixture_files, load_spec, DomainArgs};
use crate::emit::{num, Output};

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObsCmd {
    /// Observable at every decorated site (CSV).
    Eval(EvalArgs),
    /// Identity suite on one domain or on every fixture; exits 1 on a violation.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Configuration sums.
    Enum,
    /// Discrete boundary value problem (normalized only).
    Bvp,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long, value_enum, default_value_t = Method::Enum)]
    pub method: Method,
    /// Skip the normalization by the closing partition function.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Every fixture in the fixture directory.
    #[arg(long, conflicts_with_all = ["domain", "fixture"])]
    pub all: bool,
}

fn site_label(s: Site) -> (&'static str, String) {
    match s {
        Site::Corner { vertex, dir } => ("corner", format!("{vertex}/{dir}")),
        Site::Mid(e) => ("mid", e.to_string()),
        Site::Normal(n) => ("normal", n.to_string()),
    }
}

fn site_rows(dom: &Domain, values: impl Iterator<Item = (Site, ifl_core::Complex64)>) -> Output {
    let mut out = Output::csv(&["kind", "index", "x", "y", "re", "im"]);
    for (s, v) in values {
        let p = dom.site_position(s);
        let (kind, index) = site_label(s);
        out.push(vec![kind.into(), index, num(p.re), num(p.im), num(v.re), num(v.im)]);
    }
    out
}

impl ObsCmd {
    pub fn run(&self, ctx: &Ctx) -> Result<Vec<Outcome>> {
        match self {
            ObsCmd::Eval(a) => {
                let (path, spec) = a.domain.load()?;
                let (dom, bc) = config::build(&spec, &path)?;
                let obs = match a.method {
                    Method::Bvp if a.raw => {
                        return Err(config::input_error("--raw is not available with --method bvp"));
                    }
                    Method::Bvp => bvp::solve(&dom, &bc)?.observable,
                    Method::Enum => {
                        let c = ObservableContext::new(&dom, &bc)?;
                        let raw = c.compute()?;
                        if a.raw {
                            raw
                        } else {
                            c.normalize(&raw)?
                        }
                    }
                };
                let out = site_rows(&dom, obs.values.iter().map(|(&s, &v)| (s, v)));
                Ok(vec![Outcome::new("obs-eval", out).with_input(path)])
            }
            ObsCmd::Verify(a) => {
                let paths = if a.all { fixture_files()? } else { vec![a.domain.path()?] };
                let mut reports = Vec::new();
                let mut all_ok = true;
                for path in &paths {
                    let spec = load_spec(path)?;
                    let (dom, bc) = config::build(&spec, path)?;
                    let rep = verify_all(&dom, &bc, ctx.tol)?;
                    let ok = rep.passes(ctx.tol);
                    all_ok &= ok;
                    let defects: serde_json::Map<String, serde_json::Value> =
                        rep.defects().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
                    reports.push(json!({
                        "domain": path.display().to_string(),
                        "pass": ok,
                        "defects": defects,
                        "laplacian_vertex_violations": rep.laplacian.vertex_violations,
                        "laplacian_face_violations": rep.laplacian.face_violations,
                        "config_count": rep.config_count,
                        "sites": rep.sites,
                    }));
                }
                let out = Output::json(json!({ "pass": all_ok, "tolerance": ctx.tol, "domains": reports }))?;
                let mut o = Outcome::new("obs-verify", out);
                o.ok = all_ok;
                o.inputs = paths;
                Ok(vec![o])
            }
        }
    }
}
