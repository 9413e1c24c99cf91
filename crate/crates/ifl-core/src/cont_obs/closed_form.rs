//! Explicit solutions: cross-ratios of free arcs, the Cramer-rule
//! coefficients for no sign change and one sign change, the residue as a
//! function of `a_1`, and the drifts of the three- to five-point cases.
//! Arcs are indexed from 0, so arc `i` is `[b[2i], b[2i+1]]`.

use crate::{IflError, Result};

use super::ContinuumBC;

/// Cross-ratio of the endpoints of arcs `i` and `j`.
pub fn chi(b: &[f64], i: usize, j: usize) -> f64 {
    let (p, q) = (b[2 * i], b[2 * i + 1]);
    let (r, s) = (b[2 * j], b[2 * j + 1]);
    if r == s || p == q {
        // a degenerate arc collapsed onto one point
        return 1.0;
    }
    (p - r) * (q - s) / ((p - s) * (q - r))
}

/// Cross-ratio `chi(i, j)` with `b[2i]` replaced by `x`, divided by `chi(i, j)`.
pub fn psi(b: &[f64], i: usize, j: usize, x: f64) -> f64 {
    let (r, s) = (b[2 * j], b[2 * j + 1]);
    let p = b[2 * i];
    (x - r) * (p - s) / ((x - s) * (p - r))
}

/// Sum over sign vectors with the given entries pinned, weighted by the
/// arc signs, the quartic roots of cross-ratios and optional `psi` factors
/// of row `row` at `x` over the indices in `psi_over`.
fn sign_sum(
    b: &[f64],
    zeta: &[i8],
    pinned: &[(usize, i8)],
    psi_row: Option<(usize, f64, &[usize])>,
) -> f64 {
    let k = b.len() / 2;
    let mut total = 0.0;
    'outer: for mask in 0u32..(1 << k) {
        let s: Vec<i8> = (0..k).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
        for &(i, v) in pinned {
            if s[i] != v {
                continue 'outer;
            }
        }
        let mut term = 1.0;
        for (i, &z) in zeta.iter().enumerate() {
            if z == -1 {
                term *= f64::from(s[i]);
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                term *= chi(b, i, j).powf(f64::from(s[i] * s[j]) / 4.0);
            }
        }
        if let Some((r, x, over)) = psi_row {
            for &i in over {
                if s[i] == -1 {
                    term *= psi(b, r, i, x);
                }
            }
        }
        total += term;
    }
    total
}

/// Coefficients `p_1..p_k` of `sum_i p_i / (z - b_{2i-1})` for no sign
/// change, up to one common factor; `zeta` holds the first `k-1` arc signs.
fn cramer_coefficients(b: &[f64], zeta: &[i8]) -> Vec<f64> {
    let k = b.len() / 2;
    let last_start = b[2 * k - 2];
    let mut p = Vec::with_capacity(k);
    for r in 0..k - 1 {
        let over: Vec<usize> = (0..k - 1).filter(|&i| i != r).collect();
        let lead = (b[2 * r + 1] - b[2 * r]) / (last_start - b[2 * r + 1]);
        p.push(lead * sign_sum(b, zeta, &[(k - 1, 1), (r, -1)], Some((r, last_start, &over))));
    }
    p.push(sign_sum(b, zeta, &[(k - 1, 1)], None));
    p
}

pub fn closed_form_m0(bc: &ContinuumBC) -> Result<Vec<f64>> {
    bc.validate()?;
    if bc.m() != 0 || bc.last_at_infinity {
        return Err(IflError::InvalidBc("closed form needs m = 0 and finite endpoints".into()));
    }
    Ok(cramer_coefficients(&bc.b, &bc.zeta))
}

/// One sign change: the no-sign-change coefficients with an extra
/// degenerate arc at `a_1`; the last entry multiplies `prod (z - b_{2j-1})`.
pub fn closed_form_m1(bc: &ContinuumBC) -> Result<Vec<f64>> {
    bc.validate()?;
    if bc.m() != 1 || bc.last_at_infinity {
        return Err(IflError::InvalidBc("closed form needs m = 1 and finite endpoints".into()));
    }
    let a = bc.a[0];
    let mut b = bc.b.clone();
    b.extend([a, a]);
    let mut zeta = bc.zeta.clone();
    zeta.push(bc.closing_zeta());
    Ok(cramer_coefficients(&b, &zeta))
}

/// Residue at `a_1` for one sign change, up to a factor independent of `a_1`.
pub fn residue_closed_form(bc: &ContinuumBC) -> Result<f64> {
    bc.validate()?;
    if bc.m() != 1 || bc.last_at_infinity {
        return Err(IflError::InvalidBc("closed form needs m = 1 and finite endpoints".into()));
    }
    let a = bc.a[0];
    let b = &bc.b;
    let k = bc.k();
    let mut zeta = bc.zeta.clone();
    zeta.push(bc.closing_zeta());
    let mut lead = a - b[2 * k - 1];
    for i in 0..k {
        lead *= ((a - b[2 * i]) / (a - b[2 * i + 1])).sqrt();
    }
    let over: Vec<usize> = (0..k - 1).collect();
    let sum = sign_sum(b, &zeta, &[(k - 1, -1)], Some((k - 1, a, &over)));
    Ok(lead / sum)
}

/// `+/-/free`: the drift of SLE(3; -3/2, -3/2).
pub fn drift_three_point(a1: f64, b1: f64, b2: f64) -> f64 {
    -1.5 / (a1 - b1) - 1.5 / (a1 - b2)
}

/// `+/-/+/free` with `b_2 = ∞`.
pub fn drift_pmpf(a1: f64, a2: f64, b1: f64) -> f64 {
    -3.0 / (a1 - a2) - 1.5 / (a1 - b1) + 3.0 / (a2 + a1 - 2.0 * b1)
}

/// `+/-/free/+/free` with `b_4 = ∞`.
pub fn drift_five_point(a1: f64, b1: f64, b2: f64, b3: f64) -> f64 {
    -1.5 / (a1 - b1) - 1.5 / (a1 - b2) - 1.5 / (a1 - b3)
        + 3.0 / (a1 - b3 - ((b3 - b2) * (b3 - b1)).sqrt())
}
