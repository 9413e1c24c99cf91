use anyhow::Result;
use clap::{Args, Subcommand, ValueEnum};
use ifl_core::crossing::{lambda, GFunction, GKind};
use ifl_core::sle::{
    hitting_from, martingale_from, pmpf_bc, pmpf_ensemble, simulate, trace_curve, DriftModel, StepConfig, DEFAULT_DRIFT_CAP,
    DEFAULT_DT, DEFAULT_REFINE, DEFAULT_SWALLOW_EPS,
};
use serde::Serialize;
use serde_json::json;

use super::cont::PointsArgs;
use super::{Ctx, Outcome};
use crate::config::require_positive;
use crate::emit::{num, Output};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Derivative of the solved residue.
    Solved,
    /// Explicit three-, four- and five-point formulas.
    ClosedForm,
    /// No drift.
    Zero,
}

impl From<Model> for DriftModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Solved => DriftModel::Solved,
            Model::ClosedForm => DriftModel::ClosedForm,
            Model::Zero => DriftModel::Zero,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct StepArgs {
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 100)]
    pub paths: usize,
    #[arg(long, value_enum, default_value_t = Model::ClosedForm)]
    pub model: Model,
    #[arg(long, default_value_t = DEFAULT_DRIFT_CAP)]
    pub drift_cap: f64,
    #[arg(long, default_value_t = DEFAULT_SWALLOW_EPS)]
    pub swallow_eps: f64,
    /// Constant K of the gap-adapted step h = min(dt max(1, (s/s0)^2), s^2/K).
    #[arg(long, default_value_t = DEFAULT_REFINE)]
    pub refine: f64,
    /// Fixed steps of length dt.
    #[arg(long)]
    pub no_refine: bool,
}

impl StepArgs {
    fn config(&self) -> Result<StepConfig> {
        require_positive("dt", self.dt)?;
        require_positive("t-max", self.t_max)?;
        require_positive("drift-cap", self.drift_cap)?;
        require_positive("swallow-eps", self.swallow_eps)?;
        if !self.no_refine {
            require_positive("refine", self.refine)?;
        }
        Ok(StepConfig {
            model: self.model.into(),
            drift_cap: self.drift_cap,
            swallow_eps: self.swallow_eps,
            refine: (!self.no_refine).then_some(self.refine),
        })
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub points: PointsArgs,
    #[command(flatten)]
    pub steps: StepArgs,
    /// Record every n-th step (the final state is always recorded).
    #[arg(long, default_value_t = 100)]
    pub record_every: usize,
    /// Also reconstruct the curve tips by the zipper.
    #[arg(long)]
    pub curve: bool,
}

/// `+/-/+/free` data with `b_2` at infinity.
#[derive(Args, Clone, Debug, Serialize)]
pub struct FourPointArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a2: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub a1: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b1: f64,
    #[command(flatten)]
    pub steps: StepArgs,
}

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SleCmd {
    /// Driving function and tracked points along each path (CSV).
    Simulate(SimulateArgs),
    /// Probability that b_1 is swallowed before a_2, against G_pmpf.
    Hit(FourPointArgs),
    /// Ensemble mean of G_pmpf(lambda) at the stopping time against its start value.
    Martingale(FourPointArgs),
}

impl SleCmd {
    pub fn run(&self, ctx: &Ctx) -> Result<Vec<Outcome>> {
        match self {
            SleCmd::Simulate(a) => {
                let cfg = a.steps.config()?;
                let bc = a.points.bc()?;
                let traces = simulate(&bc, a.steps.t_max, a.steps.dt, ctx.seed, a.steps.paths, a.record_every, &cfg)?;
                let tracked = traces.first().map_or(0, |t| t.tracked[0].len());
                let mut header: Vec<String> = ["path", "t", "driving"].iter().map(|s| s.to_string()).collect();
                header.extend((0..tracked).map(|i| format!("tracked_{i}")));
                if a.curve {
                    header.extend(["curve_re".to_string(), "curve_im".to_string()]);
                }
                header.push("status".into());
                let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
                let mut out = Output::csv(&header_refs);
                for (p, tr) in traces.iter().enumerate() {
                    let curve = if a.curve { Some(trace_curve(&tr.times, &tr.driving)?) } else { None };
                    let last = tr.times.len() - 1;
                    for i in 0..tr.times.len() {
                        let mut row = vec![p.to_string(), num(tr.times[i]), num(tr.driving[i])];
                        row.extend(tr.tracked[i].iter().map(|&x| num(x)));
                        if let Some(c) = &curve {
                            row.extend([num(c[i].re), num(c[i].im)]);
                        }
                        row.push(if i == last { format!("{:?}", tr.status) } else { "Running".into() });
                        out.push(row);
                    }
                }
                Ok(vec![Outcome::new("sle-simulate", out)])
            }
            SleCmd::Hit(a) | SleCmd::Martingale(a) => {
                let cfg = a.steps.config()?;
                let bc = pmpf_bc(a.a2, a.a1, a.b1)?;
                let g = GFunction::new(GKind::Pmpf)?;
                let l0 = lambda(a.a1, a.b1, f64::INFINITY, a.a2);
                let predicted = g.eval(l0)?;
                let finals = pmpf_ensemble(&bc, a.steps.paths, a.steps.dt, a.steps.t_max, ctx.seed, &cfg)?;
                if matches!(self, SleCmd::Hit(_)) {
                    let hit = hitting_from(&finals)?;
                    let z = (hit.estimate - predicted) / hit.stderr;
                    let out = Output::json(json!({
                        "lambda": l0,
                        "predicted": predicted,
                        "estimate": hit,
                        "z": z,
                        "within_3_se": z.abs() < 3.0,
                    }))?;
                    Ok(vec![Outcome::new("sle-hit", out)])
                } else {
                    let stat = martingale_from(&bc, &finals, &g)?;
                    let out = Output::json(json!({ "lambda": l0, "statistic": stat, "within_3_se": stat.z.abs() < 3.0 }))?;
                    Ok(vec![Outcome::new("sle-martingale", out)])
                }
            }
        }
    }
}
