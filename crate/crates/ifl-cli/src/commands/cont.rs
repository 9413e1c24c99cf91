use anyhow::Result;
use clap::{Args, Subcommand};
use ifl_core::cont_obs::{drift, solve_observable, ContinuumBC};
use ifl_core::sle::{drift_at, DriftModel, DriftState};
use ifl_core::Complex64;
use serde::Serialize;
use serde_json::json;

use super::{Ctx, Outcome};
use crate::config::parse_complex;
use crate::emit::{num, Output};

/// Marked points on the real line.
#[derive(Args, Clone, Debug, Serialize)]
pub struct PointsArgs {
    /// Sign changes a_1, a_2, ... (a_1 drives the interface).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub a: Vec<f64>,
    /// Free-arc endpoints b_1 < b_2 < ...; with --b-inf the last one is omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub b: Vec<f64>,
    /// Arc signs zeta_1..zeta_{k-1}, each 1 or -1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub zeta: Vec<i8>,
    /// The last free-arc endpoint sits at infinity.
    #[arg(long)]
    pub b_inf: bool,
}

impl PointsArgs {
    pub fn bc(&self) -> Result<ContinuumBC> {
        let bc = if self.b_inf {
            ContinuumBC::with_infinite_end(self.a.clone(), self.b.clone(), self.zeta.clone())?
        } else {
            ContinuumBC::new(self.a.clone(), self.b.clone(), self.zeta.clone())?
        };
        Ok(bc)
    }
}

#[derive(Subcommand, Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContCmd {
    /// Solve for the polynomial numerator; reports residues and end coefficients.
    Solve(PointsArgs),
    /// Drift of the driving function at a_1.
    Drift(PointsArgs),
    /// Values at points of the closed upper half-plane (CSV).
    Eval(EvalArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub points: PointsArgs,
    /// Evaluation points re:im.
    #[arg(long, value_delimiter = ',', value_parser = parse_complex, allow_negative_numbers = true, required = true)]
    pub z: Vec<(f64, f64)>,
}

impl ContCmd {
    pub fn run(&self, _ctx: &Ctx) -> Result<Vec<Outcome>> {
        match self {
            ContCmd::Solve(p) => {
                let bc = p.bc()?;
                let obs = solve_observable(&bc)?;
                let residues = (0..bc.m()).map(|i| obs.residue(i)).collect::<ifl_core::Result<Vec<_>>>()?;
                let endpoints = obs.chart_bc.b.len();
                let ends = (0..endpoints)
                    .map(|j| obs.boundary_coefficient(j))
                    .collect::<ifl_core::Result<Vec<_>>>()?;
                let out = Output::json(json!({
                    "m": bc.m(),
                    "k": bc.k(),
                    "nodes": obs.nodes,
                    "poly_coeffs": obs.poly_coeffs,
                    "monomial_coeffs": obs.monomial_coeffs(),
                    "residues": residues,
                    "boundary_coefficients": ends,
                    "residual": obs.residual,
                    "condition": obs.condition,
                }))?;
                Ok(vec![Outcome::new("cont-solve", out)])
            }
            ContCmd::Drift(p) => {
                let bc = p.bc()?;
                let solved = drift(&bc)?;
                let closed = DriftState::new(&bc).ok().and_then(|s| drift_at(&s, DriftModel::ClosedForm).ok());
                let out = Output::json(json!({ "solved": solved, "closed_form": closed }))?;
                Ok(vec![Outcome::new("cont-drift", out)])
            }
            ContCmd::Eval(a) => {
                let obs = solve_observable(&a.points.bc()?)?;
                let mut out = Output::csv(&["re", "im", "f_re", "f_im"]);
                for &(re, im) in &a.z {
                    let f = obs.eval(Complex64::new(re, im))?;
                    out.push(vec![num(re), num(im), num(f.re), num(f.im)]);
                }
                Ok(vec![Outcome::new("cont-eval", out)])
            }
        }
    }
}
