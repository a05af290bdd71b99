//! Seller-side mechanisms and the regime thresholds between them.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::distributions::{Distribution, Regularity};
use crate::error::{check_discount, check_unit, Error, Result};
use crate::numerics::{find_root, integrate_piecewise, maximize_1d, QUAD_TOL, ROOT_TOL};

/// Grid used by the regularity precondition.
pub const REGULARITY_GRID: usize = 10001;
/// Lower end of the acceptance-threshold search of the dynamic mechanism.
pub const THETA_BAR_MIN: f64 = 1e-6;
/// Width at which the bisection for the D-versus-EAO crossing stops.
pub const DELTA_BISECTION_TOL: f64 = 1e-6;

const INNER_ROOT_TOL: f64 = 1e-13;
const DELTA_SEARCH: (f64, f64) = (1e-4, 1.0 - 1e-4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MechanismKind {
    Eafp,
    Epo,
    Eao,
    D,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] = [Self::Eafp, Self::Epo, Self::Eao, Self::D];
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Eafp => "EAFP",
            Self::Epo => "EPO",
            Self::Eao => "EAO",
            Self::D => "D",
        };
        f.write_str(name)
    }
}

/// Optimized mechanism. Unused fields are omitted from the JSON record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismSolution {
    pub kind: MechanismKind,
    /// Time-0 price (`p` for EAFP/EAO, `p0` for D).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price0: Option<f64>,
    /// Acceptance threshold of the dynamic mechanism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_bar: Option<f64>,
    /// Lowest type served ex post: `theta*` for EPO, `theta**(theta_bar)` for D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<f64>,
    pub profit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// The uncommitted ex-post price `p1(omega)` posted to buyers believed to lie
/// in `[0, theta_bar]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExPostPriceRule {
    value: Distribution,
    theta_bar: f64,
}

impl ExPostPriceRule {
    pub fn new(value: Distribution, theta_bar: f64) -> Result<Self> {
        if !(theta_bar > 0.0 && theta_bar <= 1.0) {
            return Err(Error::Domain {
                what: "theta_bar",
                value: theta_bar,
                domain: "(0, 1]",
            });
        }
        Ok(Self { value, theta_bar })
    }

    pub fn theta_bar(&self) -> f64 {
        self.theta_bar
    }

    /// Price solving `psi(p, theta_bar) = omega`; `None` when the cost exceeds
    /// every virtual valuation (no sale).
    pub fn price(&self, omega: f64) -> Option<f64> {
        if !(omega >= 0.0) || omega > self.theta_bar {
            return None;
        }
        let theta_bar = self.theta_bar;
        find_root(
            |p| self.value.psi(p, theta_bar) - omega,
            0.0,
            theta_bar,
            INNER_ROOT_TOL,
        )
        .ok()
        .map(|r| r.x)
    }

    /// Whether type `theta` buys at the ex-post price when the cost is `omega`.
    pub fn buys(&self, theta: f64, omega: f64) -> bool {
        theta <= self.theta_bar && omega <= self.value.psi(theta, self.theta_bar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// EPO overtakes EAFP above this discount factor.
    pub delta_star: f64,
    /// EPO overtakes EAO above this discount factor.
    pub delta_bar: f64,
    /// D overtakes EAO above this discount factor.
    pub delta_double_star: f64,
}

#[derive(Debug, Clone)]
pub struct DynamicSolution {
    pub solution: MechanismSolution,
    pub price_rule: ExPostPriceRule,
    /// Coarse-scan points tied with the selected threshold.
    pub coarse_ties: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub delta: f64,
    pub pi_eafp: f64,
    pub pi_epo: f64,
    pub pi_eao: f64,
    pub pi_d: f64,
    pub best: MechanismKind,
}

/// Integrals of the dynamic mechanism at one acceptance threshold.
#[derive(Debug, Clone, Copy)]
struct DynamicParts {
    theta_ss: f64,
    /// `∫_{θ**}^{θ̄} G(ψ(θ, θ̄)) dθ`: the marginal type's value of waiting.
    waiting: f64,
    /// `∫_{θ**}^{θ̄} 𝒢(ψ(θ, θ̄)) f(θ) dθ`: undiscounted ex-post profit.
    continuation: f64,
}

/// A value law `F` for the buyer and a cost law `G` for the seller.
#[derive(Debug)]
pub struct Market {
    value: Distribution,
    cost: Distribution,
    regularity: OnceLock<Regularity>,
}

impl Clone for Market {
    fn clone(&self) -> Self {
        Self::new(self.value.clone(), self.cost.clone())
    }
}

impl Market {
    pub fn new(value: Distribution, cost: Distribution) -> Self {
        Self {
            value,
            cost,
            regularity: OnceLock::new(),
        }
    }

    pub fn uniform() -> Self {
        Self::new(Distribution::uniform(), Distribution::uniform())
    }

    pub fn value(&self) -> &Distribution {
        &self.value
    }

    pub fn cost(&self) -> &Distribution {
        &self.cost
    }

    pub fn is_uniform(&self) -> bool {
        self.value.is_uniform() && self.cost.is_uniform()
    }

    pub fn regularity(&self) -> Regularity {
        *self
            .regularity
            .get_or_init(|| self.value.check_regular(REGULARITY_GRID))
    }

    pub fn require_regular(&self) -> Result<()> {
        match self.regularity() {
            Regularity { regular: true, .. } => Ok(()),
            Regularity {
                violation: Some((from, to)),
                ..
            } => Err(Error::NotRegular { from, to }),
            Regularity {
                violation: None, ..
            } => Err(Error::NotRegular { from: 0.0, to: 1.0 }),
        }
    }

    fn integrate_theta<I: Fn(f64) -> f64>(&self, integrand: I, a: f64, b: f64) -> f64 {
        integrate_piecewise(integrand, a, b, &self.value.breakpoints(), QUAD_TOL).value
    }

    // ---------------------------------------------------------------- EAFP

    /// `Π^EAFP(p) = (1 - F(p)) (p - E[ω])`.
    pub fn eafp_profit_at(&self, price: f64) -> f64 {
        (1.0 - self.value.cdf_at(price)) * (price - self.cost.mean())
    }

    /// Fixed price with specific performance: solves `psi(p, 1) = E[ω]`.
    pub fn solve_eafp(&self) -> Result<MechanismSolution> {
        self.require_regular()?;
        let mean_cost = self.cost.mean();
        let root = find_root(|p| self.value.psi(p, 1.0) - mean_cost, 0.0, 1.0, ROOT_TOL)?;
        Ok(MechanismSolution {
            kind: MechanismKind::Eafp,
            price0: Some(root.x),
            theta_bar: None,
            theta_star: None,
            profit: self.eafp_profit_at(root.x),
            delta: None,
        })
    }

    // ----------------------------------------------------------------- EPO

    /// Lowest type served by the ex-post posted price: `psi(theta*, 1) = 0`.
    pub fn theta_star(&self) -> Result<f64> {
        self.theta_star_star(1.0)
    }

    /// Undiscounted ex-post profit from types above `x`:
    /// `∫_x^1 𝒢(psi(θ, 1)) f(θ) dθ`, for `x >= theta*`.
    pub fn fixed_price_continuation(&self, x: f64) -> f64 {
        self.integrate_theta(
            |t| self.cost.left_integral_at(self.value.psi(t, 1.0).max(0.0)) * self.value.pdf_at(t),
            x,
            1.0,
        )
    }

    /// Waits for the cost and posts the price solving `psi(p, 1) = ω`.
    pub fn solve_epo(&self, delta: f64) -> Result<(MechanismSolution, ExPostPriceRule)> {
        check_discount(delta)?;
        self.require_regular()?;
        let theta_star = self.theta_star()?;
        let profit = delta * self.fixed_price_continuation(theta_star);
        let solution = MechanismSolution {
            kind: MechanismKind::Epo,
            price0: None,
            theta_bar: None,
            theta_star: Some(theta_star),
            profit,
            delta: Some(delta),
        };
        Ok((solution, ExPostPriceRule::new(self.value.clone(), 1.0)?))
    }

    // ----------------------------------------------------------------- EAO

    /// `Π^EAO(p) = (1 - F(p)) 𝒢(p)`.
    pub fn eao_profit_at(&self, price: f64) -> f64 {
        (1.0 - self.value.cdf_at(price)) * self.cost.left_integral_at(price)
    }

    /// Fixed price with an at-will clause; trade iff `theta >= p >= omega`.
    /// Among several maximizers the smallest price is returned.
    pub fn solve_eao(&self) -> Result<MechanismSolution> {
        let best = maximize_1d(|p| self.eao_profit_at(p), 0.0, 1.0);
        Ok(MechanismSolution {
            kind: MechanismKind::Eao,
            price0: Some(best.argmax),
            theta_bar: None,
            theta_star: None,
            profit: best.value,
            delta: None,
        })
    }

    // ------------------------------------------------------------- Dynamic

    /// Root of `psi(theta, theta_bar) = 0`.
    pub fn theta_star_star(&self, theta_bar: f64) -> Result<f64> {
        check_threshold(theta_bar)?;
        self.require_regular()?;
        Ok(self.theta_ss(theta_bar))
    }

    fn theta_ss(&self, theta_bar: f64) -> f64 {
        // psi(0, θ̄) < 0 < psi(θ̄, θ̄) = θ̄, so the bracket always holds.
        match find_root(
            |t| self.value.psi(t, theta_bar),
            0.0,
            theta_bar,
            INNER_ROOT_TOL,
        ) {
            Ok(r) => r.x,
            Err(_) => f64::NAN,
        }
    }

    fn dynamic_parts(&self, theta_bar: f64) -> DynamicParts {
        let theta_ss = self.theta_ss(theta_bar);
        let waiting = self.integrate_theta(
            |t| self.cost.cdf_at(self.value.psi(t, theta_bar).max(0.0)),
            theta_ss,
            theta_bar,
        );
        let continuation = self.integrate_theta(
            |t| {
                self.cost
                    .left_integral_at(self.value.psi(t, theta_bar).max(0.0))
                    * self.value.pdf_at(t)
            },
            theta_ss,
            theta_bar,
        );
        DynamicParts {
            theta_ss,
            waiting,
            continuation,
        }
    }

    /// Time-0 price leaving the marginal type `theta_bar` indifferent between
    /// buying now and waiting for the ex-post offer.
    pub fn coasian_p0(&self, theta_bar: f64, delta: f64) -> Result<f64> {
        check_threshold(theta_bar)?;
        check_discount(delta)?;
        self.require_regular()?;
        Ok(theta_bar - delta * self.dynamic_parts(theta_bar).waiting)
    }

    fn dynamic_profit_unchecked(&self, theta_bar: f64, delta: f64) -> f64 {
        let parts = self.dynamic_parts(theta_bar);
        let p0 = theta_bar - delta * parts.waiting;
        (1.0 - self.value.cdf_at(theta_bar)) * (p0 - self.cost.mean()) + delta * parts.continuation
    }

    /// Expected time-0 profit `Π^D(theta_bar, delta)` of the dynamic mechanism.
    pub fn dynamic_profit(&self, theta_bar: f64, delta: f64) -> Result<f64> {
        check_threshold(theta_bar)?;
        check_discount(delta)?;
        self.require_regular()?;
        Ok(self.dynamic_profit_unchecked(theta_bar, delta))
    }

    /// Maximizes `Π^D(., delta)` over `[THETA_BAR_MIN, 1]`.
    pub fn solve_dynamic(&self, delta: f64) -> Result<DynamicSolution> {
        check_discount(delta)?;
        self.require_regular()?;
        let best = maximize_1d(
            |x| self.dynamic_profit_unchecked(x, delta),
            THETA_BAR_MIN,
            1.0,
        );
        let theta_bar = best.argmax;
        let parts = self.dynamic_parts(theta_bar);
        if !best.value.is_finite() || parts.theta_ss.is_nan() {
            return Err(Error::NonFinite { at: theta_bar });
        }
        let solution = MechanismSolution {
            kind: MechanismKind::D,
            price0: Some(theta_bar - delta * parts.waiting),
            theta_bar: Some(theta_bar),
            theta_star: Some(parts.theta_ss),
            profit: best.value,
            delta: Some(delta),
        };
        Ok(DynamicSolution {
            solution,
            price_rule: ExPostPriceRule::new(self.value.clone(), theta_bar)?,
            coarse_ties: best.ties,
        })
    }

    /// Slope of `Π^D(x, .)` in the discount factor:
    /// `Π^D(x, δ) = Π^EAFP(x) + δ Φ(x)`.
    pub fn phi_cap(&self, x: f64) -> Result<f64> {
        check_threshold(x)?;
        self.require_regular()?;
        let theta_ss = self.theta_ss(x);
        let continuation = self.integrate_theta(
            |t| self.cost.left_integral_at(self.value.psi(t, x).max(0.0)) * self.value.pdf_at(t),
            theta_ss,
            x,
        );
        let waiting = self.integrate_theta(
            |t| self.cost.cdf_at(self.value.psi(t, x).max(0.0)),
            theta_ss,
            x,
        );
        Ok(continuation - (1.0 - self.value.cdf_at(x)) * waiting)
    }

    // ---------------------------------------------------------- Thresholds

    /// `δ*`, `δ̄` as ratios against the undiscounted ex-post profit and `δ**`
    /// by bisection on the sign of `π^D(δ) - π^EAO`.
    pub fn regime_thresholds(&self) -> Result<RegimeThresholds> {
        self.require_regular()?;
        let ex_post = self.fixed_price_continuation(self.theta_star()?);
        let pi_eafp = self.solve_eafp()?.profit;
        let pi_eao = self.solve_eao()?.profit;
        let delta_star = pi_eafp / ex_post;
        let delta_bar = pi_eao / ex_post;

        let gap =
            |delta: f64| -> Result<f64> { Ok(self.solve_dynamic(delta)?.solution.profit - pi_eao) };
        let (mut lo, mut hi) = DELTA_SEARCH;
        let (g_lo, g_hi) = (gap(lo)?, gap(hi)?);
        if !(g_lo < 0.0 && g_hi > 0.0) {
            return Err(Error::ThresholdNotFound {
                name: "delta**",
                reason: format!(
                    "pi_D - pi_EAO does not change sign on [{lo}, {hi}] ({g_lo:e}, {g_hi:e})"
                ),
            });
        }
        while hi - lo > DELTA_BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if gap(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(RegimeThresholds {
            delta_star,
            delta_bar,
            delta_double_star: 0.5 * (lo + hi),
        })
    }

    /// Profits of all four mechanisms at `delta` and the best of them.
    pub fn compare(&self, delta: f64) -> Result<ComparisonReport> {
        check_discount(delta)?;
        let pi_eafp = self.solve_eafp()?.profit;
        let pi_epo = self.solve_epo(delta)?.0.profit;
        let pi_eao = self.solve_eao()?.profit;
        let pi_d = self.solve_dynamic(delta)?.solution.profit;
        let ranked = [
            (MechanismKind::Eafp, pi_eafp),
            (MechanismKind::Epo, pi_epo),
            (MechanismKind::Eao, pi_eao),
            (MechanismKind::D, pi_d),
        ];
        let mut best = ranked[0];
        for candidate in ranked {
            if candidate.1 > best.1 {
                best = candidate;
            }
        }
        Ok(ComparisonReport {
            delta,
            pi_eafp,
            pi_epo,
            pi_eao,
            pi_d,
            best: best.0,
        })
    }
}

fn check_threshold(theta_bar: f64) -> Result<()> {
    check_unit("theta_bar", theta_bar)?;
    if theta_bar == 0.0 {
        return Err(Error::Domain {
            what: "theta_bar",
            value: theta_bar,
            domain: "(0, 1]",
        });
    }
    Ok(())
}
