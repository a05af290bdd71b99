//! The mirror problem: the buyer designs the mechanism, the cost is known at
//! time 0 and the value is only learned one period later.
//! Uniform value and cost only.

use serde::{Deserialize, Serialize};

use crate::error::{check_discount, check_open_discount, Error, Result};
use crate::mechanisms::{Market, MechanismKind};
use crate::numerics::maximize_1d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuyerSolution {
    pub kind: MechanismKind,
    /// `P` for EAFP/EAO, `P0` for D; EPO posts `theta / 2` instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_bar: Option<f64>,
    pub utility: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Buyer's utility from a fixed price with specific performance.
pub fn eafp_utility(price: f64) -> f64 {
    price * (0.5 - price)
}

/// Buyer's utility from a fixed price that can be refused once `theta` is known.
pub fn eao_utility(price: f64) -> f64 {
    price * (1.0 - price) * (1.0 - price) / 2.0
}

/// Highest seller cost accepting the time-0 offer in the dynamic mechanism.
pub fn dynamic_threshold(delta: f64) -> f64 {
    (3.0 * delta - 4.0 + (16.0 - 16.0 * delta + delta * delta).sqrt()) / (4.0 * delta)
}

/// Time-0 price that leaves the marginal cost `omega_bar` indifferent.
pub fn dynamic_price(omega_bar: f64, delta: f64) -> f64 {
    omega_bar + delta / 4.0 * (1.0 - omega_bar).powi(2)
}

/// Ex-post offer made to sellers with cost above `omega_bar`.
pub fn dynamic_ex_post_price(omega_bar: f64, theta: f64) -> f64 {
    0.5 * (omega_bar + theta)
}

pub fn dynamic_utility(omega_bar: f64, delta: f64) -> f64 {
    omega_bar * (0.5 - omega_bar - delta / 4.0 * (1.0 - omega_bar).powi(2))
        + delta * (1.0 - omega_bar).powi(3) / 12.0
}

/// Solves the buyer-side mechanism `kind`. The discount factor is required
/// for EPO and D and ignored otherwise.
pub fn solve_buyer(
    market: &Market,
    kind: MechanismKind,
    delta: Option<f64>,
) -> Result<BuyerSolution> {
    if !market.is_uniform() {
        return Err(Error::Unsupported(
            "buyer-side mechanisms are only available for uniform value and cost laws".into(),
        ));
    }
    let discounted = matches!(kind, MechanismKind::Epo | MechanismKind::D);
    let delta = if discounted {
        let d = delta.ok_or_else(|| {
            Error::InvalidArgument(format!("buyer-side {kind} needs a discount factor"))
        })?;
        check_discount(d)?;
        Some(d)
    } else {
        None
    };
    let (price, omega_bar, utility) = match (kind, delta) {
        (MechanismKind::Eafp, _) => {
            let best = maximize_1d(eafp_utility, 0.0, 1.0);
            (Some(best.argmax), None, best.value)
        }
        (MechanismKind::Eao, _) => {
            let best = maximize_1d(eao_utility, 0.0, 1.0);
            (Some(best.argmax), None, best.value)
        }
        (MechanismKind::Epo, Some(delta)) => (None, None, delta / 12.0),
        (MechanismKind::D, Some(delta)) => {
            check_open_discount(delta)?;
            let omega_bar = dynamic_threshold(delta);
            (
                Some(dynamic_price(omega_bar, delta)),
                Some(omega_bar),
                dynamic_utility(omega_bar, delta),
            )
        }
        _ => unreachable!("discount factor checked above"),
    };
    Ok(BuyerSolution {
        kind,
        price,
        omega_bar,
        utility,
        delta,
    })
}
