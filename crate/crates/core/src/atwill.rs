//! At-will variants of the dynamic mechanism for uniform value and cost.
//!
//! In D1 the time-0 contract may be cancelled by the seller once the cost is
//! known; in D2 the seller may also follow a cancellation with a fresh offer
//! to the buyers who had accepted. Both are solved only for uniform laws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_discount, Error, Result};
use crate::mechanisms::Market;
use crate::numerics::{find_root, maximize_1d, ROOT_TOL};

/// Number of cancellation thresholds swept by [`solve_d2`].
pub const D2_GRID: usize = 2001;
/// Acceptance-threshold scan used to bracket roots of the D2 constraint.
pub const D2_THETA_SCAN: usize = 1000;
/// Cancellation thresholds this close to 0 or 1 are reported as degenerate.
pub const D2_CORNER: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1Solution {
    pub theta_bar: f64,
    pub p0: f64,
    pub profit: f64,
    pub epo_equivalent: bool,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `omega_bar > 2 theta_bar - 1`: the renegotiation price exceeds `theta_bar`.
    High,
    /// `omega_bar <= 2 theta_bar - 1`: renegotiation sells to every accepting type.
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D2Candidate {
    pub theta_bar: f64,
    pub omega_bar: f64,
    pub p0: f64,
    pub branch: Branch,
    pub profit: f64,
    /// Set when `omega_bar` sits next to 0 or 1, where the contract is nearly void.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum D2Solution {
    Interior(D2Candidate),
    EpoEquivalent { profit: f64 },
}

impl D2Solution {
    pub fn profit(&self) -> f64 {
        match self {
            D2Solution::Interior(c) => c.profit,
            D2Solution::EpoEquivalent { profit } => *profit,
        }
    }
}

fn require_uniform(market: &Market, what: &str) -> Result<()> {
    if market.is_uniform() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{what} is only available for uniform value and cost laws"
        )))
    }
}

// ------------------------------------------------------------------- D1

/// Time-0 price that leaves type `theta_bar` indifferent under D1.
pub fn d1_price(theta_bar: f64, delta: f64) -> f64 {
    0.5 * theta_bar * ((1.0 - delta).sqrt() + 1.0)
}

/// `Π^D1(theta_bar) = (1 - θ̄) p0² / 2 + δ θ̄³ / 12`.
pub fn d1_profit(theta_bar: f64, delta: f64) -> f64 {
    let p0 = d1_price(theta_bar, delta);
    (1.0 - theta_bar) * p0 * p0 / 2.0 + delta * theta_bar.powi(3) / 12.0
}

pub fn solve_d1(market: &Market, delta: f64) -> Result<D1Solution> {
    require_uniform(market, "D1")?;
    check_open_discount(delta)?;
    let s = (1.0 - delta).sqrt();
    let interior = (4.0 * s - 2.0 * delta + 4.0) / (6.0 * s - 5.0 * delta + 6.0);
    let theta_bar = interior.min(1.0);
    let epo_equivalent = theta_bar >= 1.0;
    let profit = if epo_equivalent {
        delta / 12.0
    } else {
        d1_profit(theta_bar, delta)
    };
    Ok(D1Solution {
        theta_bar,
        p0: d1_price(theta_bar, delta),
        profit,
        epo_equivalent,
        delta,
    })
}

// ------------------------------------------------------------------- D2

fn branch_of(theta_bar: f64, omega_bar: f64) -> Branch {
    if omega_bar > 2.0 * theta_bar - 1.0 {
        Branch::High
    } else {
        Branch::Low
    }
}

fn branch_rhs(theta_bar: f64, omega_bar: f64, delta: f64, branch: Branch) -> f64 {
    match branch {
        Branch::High => omega_bar + delta * (1.0 - omega_bar).powi(2) / (4.0 * (1.0 - theta_bar)),
        Branch::Low => omega_bar + delta * (theta_bar - omega_bar),
    }
}

/// Time-0 price implied by type `theta_bar`'s indifference under D2.
pub fn d2_price(theta_bar: f64, omega_bar: f64, delta: f64) -> f64 {
    theta_bar - delta * theta_bar * theta_bar / (4.0 * omega_bar)
}

/// Gap between the marginal type's indifference price and the price at which
/// the seller is indifferent about cancelling at `omega_bar`.
pub fn d2_residual(theta_bar: f64, omega_bar: f64, delta: f64) -> (f64, Branch) {
    let branch = branch_of(theta_bar, omega_bar);
    if omega_bar == 0.0 {
        return (f64::INFINITY, branch);
    }
    let lhs = d2_price(theta_bar, omega_bar, delta);
    (
        lhs - branch_rhs(theta_bar, omega_bar, delta, branch),
        branch,
    )
}

/// Expected D2 profit at `(theta_bar, omega_bar)` with `p0` from [`d2_price`].
pub fn d2_profit(theta_bar: f64, omega_bar: f64, delta: f64) -> f64 {
    let p0 = d2_price(theta_bar, omega_bar, delta);
    let renegotiated = if omega_bar >= 2.0 * theta_bar - 1.0 {
        (1.0 - omega_bar).powi(3) / (12.0 * (1.0 - theta_bar))
    } else {
        (4.0 * theta_bar * theta_bar - 6.0 * theta_bar * omega_bar - 2.0 * theta_bar
            + 3.0 * omega_bar * omega_bar
            + 1.0)
            / 6.0
    };
    delta * theta_bar.powi(3) / 12.0
        + (1.0 - theta_bar) * omega_bar * (p0 - omega_bar / 2.0)
        + (1.0 - theta_bar) * delta * renegotiated
}

fn d2_candidates_at(omega_bar: f64, delta: f64) -> Vec<D2Candidate> {
    let residual = |t: f64| d2_residual(t, omega_bar, delta).0;
    let step = 1.0 / D2_THETA_SCAN as f64;
    let mut out = Vec::new();
    let mut prev_t = 0.5 * step;
    let mut prev_r = residual(prev_t);
    for i in 1..D2_THETA_SCAN {
        let t = (i as f64 + 0.5) * step;
        let r = residual(t);
        if prev_r.is_finite() && r.is_finite() && (prev_r == 0.0 || prev_r * r < 0.0) {
            if let Ok(root) = find_root(residual, prev_t, t, ROOT_TOL) {
                if root.residual.abs() <= ROOT_TOL {
                    out.push(candidate(root.x, omega_bar, delta));
                }
            }
        }
        prev_t = t;
        prev_r = r;
    }
    out
}

fn candidate(theta_bar: f64, omega_bar: f64, delta: f64) -> D2Candidate {
    let lhs = d2_price(theta_bar, omega_bar, delta);
    let mut branch = branch_of(theta_bar, omega_bar);
    if (omega_bar - (2.0 * theta_bar - 1.0)).abs() <= ROOT_TOL {
        let high = (lhs - branch_rhs(theta_bar, omega_bar, delta, Branch::High)).abs();
        let low = (lhs - branch_rhs(theta_bar, omega_bar, delta, Branch::Low)).abs();
        branch = if high < low {
            Branch::High
        } else {
            Branch::Low
        };
    }
    D2Candidate {
        theta_bar,
        omega_bar,
        p0: lhs,
        branch,
        profit: d2_profit(theta_bar, omega_bar, delta),
        degenerate: !(D2_CORNER..=1.0 - D2_CORNER).contains(&omega_bar),
    }
}

fn best_of(cands: impl IntoIterator<Item = D2Candidate>) -> Option<D2Candidate> {
    cands
        .into_iter()
        .fold(None, |best: Option<D2Candidate>, c| match best {
            Some(b) if b.profit >= c.profit => Some(b),
            _ => Some(c),
        })
}

/// Best candidate on the cancellation-threshold curve nearest to `theta_hint`.
fn profit_on_curve(omega_bar: f64, delta: f64, theta_hint: f64) -> Option<D2Candidate> {
    d2_candidates_at(omega_bar, delta)
        .into_iter()
        .min_by(|a, b| {
            (a.theta_bar - theta_hint)
                .abs()
                .total_cmp(&(b.theta_bar - theta_hint).abs())
        })
}

/// Sweeps `omega_bar` over a [`D2_GRID`]-point grid, solves the constraint
/// for `theta_bar` at each point and keeps the most profitable solution,
/// then refines it between the neighbouring grid points. Returns
/// [`D2Solution::EpoEquivalent`] when the constraint has no solution.
pub fn solve_d2(market: &Market, delta: f64) -> Result<D2Solution> {
    require_uniform(market, "D2")?;
    check_open_discount(delta)?;
    let n = D2_GRID as f64;
    let grid: Vec<f64> = (0..D2_GRID).map(|j| (j as f64 + 0.5) / n).collect();
    let per_point: Vec<Option<D2Candidate>> = grid
        .par_iter()
        .map(|&w| best_of(d2_candidates_at(w, delta)))
        .collect();
    let Some((index, coarse)) = per_point
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .fold(
            None,
            |best: Option<(usize, D2Candidate)>, (i, c)| match best {
                Some((_, b)) if b.profit >= c.profit => best,
                _ => Some((i, c)),
            },
        )
    else {
        return Ok(D2Solution::EpoEquivalent {
            profit: delta / 12.0,
        });
    };

    let lo = grid[index.saturating_sub(1)];
    let hi = grid[(index + 1).min(D2_GRID - 1)];
    let refined = maximize_1d(
        |w| profit_on_curve(w, delta, coarse.theta_bar).map_or(f64::NEG_INFINITY, |c| c.profit),
        lo,
        hi,
    );
    let best = match profit_on_curve(refined.argmax, delta, coarse.theta_bar) {
        Some(c) if c.profit > coarse.profit => c,
        _ => coarse,
    };
    if best.degenerate {
        log::warn!(
            "D2 optimum at omega_bar = {} is next to a corner of the grid",
            best.omega_bar
        );
    }
    Ok(D2Solution::Interior(best))
}
