//! Plays solved mechanisms against sampled `(theta, omega)` draws.
//!
//! Draw `i` of a run takes its two uniforms from words `[4i, 4i + 4)` of a
//! ChaCha8 stream keyed by the seed, so every draw depends only on
//! `(seed, i)` and the estimate does not depend on how the work is split
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buyer_side::{dynamic_ex_post_price, BuyerSolution};
use crate::error::{check_discount, Error, Result};
use crate::mechanisms::{ExPostPriceRule, Market, MechanismKind, MechanismSolution};

pub const MIN_DRAWS: u64 = 1000;
const CHUNK: u64 = 1 << 14;
const WORDS_PER_DRAW: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    T0,
    T1,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub stage: Stage,
    pub traded: bool,
    pub transfer: f64,
    pub canceled: bool,
}

impl Outcome {
    const NO_TRADE: Outcome = Outcome {
        stage: Stage::None,
        traded: false,
        transfer: 0.0,
        canceled: false,
    };

    fn trade(stage: Stage, transfer: f64) -> Self {
        Outcome {
            stage,
            traded: true,
            transfer,
            canceled: false,
        }
    }
}

/// Allocation and transfer of a mechanism as a function of `(theta, omega)`.
#[derive(Debug, Clone)]
pub enum OutcomeRule {
    Never,
    /// Seller posts `price` at time 0 and must deliver.
    FixedPrice {
        price: f64,
    },
    /// Seller posts `price` at time 0 and cancels when `omega > price`.
    AtWill {
        price: f64,
    },
    /// Seller waits for the cost and posts `p1(omega)`.
    ExPost {
        rule: ExPostPriceRule,
    },
    /// Types above the rule's threshold buy at `p0`; the rest face `p1(omega)`.
    Dynamic {
        p0: f64,
        rule: ExPostPriceRule,
    },
    /// Buyer offers `price` at time 0; the seller accepts iff `omega <= price`.
    BuyerFixedPrice {
        price: f64,
    },
    /// As above, but the buyer walks away when `theta < price`.
    BuyerAtWill {
        price: f64,
    },
    /// Buyer learns `theta` and offers `theta / 2`.
    BuyerExPost,
    /// Costs up to `omega_bar` sell at `price0`; the rest face `(omega_bar + theta) / 2`.
    BuyerDynamic {
        price0: f64,
        omega_bar: f64,
    },
}

impl OutcomeRule {
    pub fn evaluate(&self, theta: f64, omega: f64) -> Outcome {
        match self {
            OutcomeRule::Never => Outcome::NO_TRADE,
            OutcomeRule::FixedPrice { price } => {
                if theta >= *price {
                    Outcome::trade(Stage::T0, *price)
                } else {
                    Outcome::NO_TRADE
                }
            }
            OutcomeRule::AtWill { price } => {
                if theta < *price {
                    Outcome::NO_TRADE
                } else if omega > *price {
                    Outcome {
                        stage: Stage::T0,
                        traded: false,
                        transfer: 0.0,
                        canceled: true,
                    }
                } else {
                    Outcome::trade(Stage::T0, *price)
                }
            }
            OutcomeRule::ExPost { rule } => ex_post(rule, theta, omega),
            OutcomeRule::Dynamic { p0, rule } => {
                if theta >= rule.theta_bar() {
                    Outcome::trade(Stage::T0, *p0)
                } else {
                    ex_post(rule, theta, omega)
                }
            }
            OutcomeRule::BuyerFixedPrice { price } => {
                if omega <= *price {
                    Outcome::trade(Stage::T0, *price)
                } else {
                    Outcome::NO_TRADE
                }
            }
            OutcomeRule::BuyerAtWill { price } => {
                if omega > *price {
                    Outcome::NO_TRADE
                } else if theta < *price {
                    Outcome {
                        stage: Stage::T0,
                        traded: false,
                        transfer: 0.0,
                        canceled: true,
                    }
                } else {
                    Outcome::trade(Stage::T0, *price)
                }
            }
            OutcomeRule::BuyerExPost => {
                let offer = theta / 2.0;
                if omega <= offer {
                    Outcome::trade(Stage::T1, offer)
                } else {
                    Outcome::NO_TRADE
                }
            }
            OutcomeRule::BuyerDynamic { price0, omega_bar } => {
                if omega <= *omega_bar {
                    return Outcome::trade(Stage::T0, *price0);
                }
                let offer = dynamic_ex_post_price(*omega_bar, theta);
                if theta >= *omega_bar && omega <= offer {
                    Outcome::trade(Stage::T1, offer)
                } else {
                    Outcome::NO_TRADE
                }
            }
        }
    }
}

fn ex_post(rule: &ExPostPriceRule, theta: f64, omega: f64) -> Outcome {
    if !rule.buys(theta, omega) {
        return Outcome::NO_TRADE;
    }
    match rule.price(omega) {
        Some(p) => Outcome::trade(Stage::T1, p),
        None => Outcome::NO_TRADE,
    }
}

/// Rule implementing a seller-side solution.
pub fn build_rule(solution: &MechanismSolution, market: &Market) -> Result<OutcomeRule> {
    let missing =
        |field: &str| Error::InvalidArgument(format!("{} solution lacks {field}", solution.kind));
    match solution.kind {
        MechanismKind::Eafp => Ok(OutcomeRule::FixedPrice {
            price: solution.price0.ok_or_else(|| missing("price0"))?,
        }),
        MechanismKind::Eao => Ok(OutcomeRule::AtWill {
            price: solution.price0.ok_or_else(|| missing("price0"))?,
        }),
        MechanismKind::Epo => Ok(OutcomeRule::ExPost {
            rule: ExPostPriceRule::new(market.value().clone(), 1.0)?,
        }),
        MechanismKind::D => Ok(OutcomeRule::Dynamic {
            p0: solution.price0.ok_or_else(|| missing("price0"))?,
            rule: ExPostPriceRule::new(
                market.value().clone(),
                solution.theta_bar.ok_or_else(|| missing("theta_bar"))?,
            )?,
        }),
    }
}

/// Rule implementing a buyer-side solution.
pub fn build_buyer_rule(solution: &BuyerSolution) -> Result<OutcomeRule> {
    let missing = |field: &str| {
        Error::InvalidArgument(format!("buyer {} solution lacks {field}", solution.kind))
    };
    match solution.kind {
        MechanismKind::Eafp => Ok(OutcomeRule::BuyerFixedPrice {
            price: solution.price.ok_or_else(|| missing("price"))?,
        }),
        MechanismKind::Eao => Ok(OutcomeRule::BuyerAtWill {
            price: solution.price.ok_or_else(|| missing("price"))?,
        }),
        MechanismKind::Epo => Ok(OutcomeRule::BuyerExPost),
        MechanismKind::D => Ok(OutcomeRule::BuyerDynamic {
            price0: solution.price.ok_or_else(|| missing("price"))?,
            omega_bar: solution.omega_bar.ok_or_else(|| missing("omega_bar"))?,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub profit_mean: f64,
    pub profit_se: f64,
    pub buyer_surplus_mean: f64,
    pub buyer_surplus_se: f64,
    pub trade_prob: f64,
    pub n: u64,
    pub seed: u64,
}

impl SimEstimate {
    /// Whether `analytic` lies within `k` standard errors of the profit estimate.
    pub fn profit_agrees(&self, analytic: f64, k: f64) -> bool {
        (self.profit_mean - analytic).abs() <= k * self.profit_se
    }

    pub fn surplus_agrees(&self, analytic: f64, k: f64) -> bool {
        (self.buyer_surplus_mean - analytic).abs() <= k * self.buyer_surplus_se
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (a, b) = (self.n as f64, other.n as f64);
        Moments {
            n,
            mean: self.mean + d * b / n as f64,
            m2: self.m2 + other.m2 + d * d * a * b / n as f64,
        }
    }

    fn standard_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    profit: Moments,
    surplus: Moments,
    trades: u64,
}

impl Tally {
    fn merge(self, other: Tally) -> Tally {
        Tally {
            profit: self.profit.merge(other.profit),
            surplus: self.surplus.merge(other.surplus),
            trades: self.trades + other.trades,
        }
    }
}

/// Uniform pair for draw `index`.
pub fn draw_uniforms(seed: u64, index: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(WORDS_PER_DRAW * index as u128);
    (rng.random(), rng.random())
}

/// Estimates seller profit, buyer surplus and trade probability of `rule`
/// from `n` inverse-cdf draws. Time-1 trades are weighted by `delta`.
pub fn simulate(
    rule: &OutcomeRule,
    market: &Market,
    delta: f64,
    n: u64,
    seed: u64,
) -> Result<SimEstimate> {
    check_discount(delta)?;
    if n < MIN_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_DRAWS} draws are required, got {n}"
        )));
    }
    let chunks = n.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_word_pos(WORDS_PER_DRAW * start as u128);
            let mut tally = Tally::default();
            for _ in start..end {
                let theta = market.value().quantile(rng.random());
                let omega = market.cost().quantile(rng.random());
                let out = rule.evaluate(theta, omega);
                let weight = if out.stage == Stage::T1 { delta } else { 1.0 };
                let cost = if out.traded { omega } else { 0.0 };
                let value = if out.traded { theta } else { 0.0 };
                tally.profit.push(weight * (out.transfer - cost));
                tally.surplus.push(weight * (value - out.transfer));
                tally.trades += u64::from(out.traded);
            }
            tally
        })
        .collect();
    let total = tallies.into_iter().fold(Tally::default(), Tally::merge);
    Ok(SimEstimate {
        profit_mean: total.profit.mean,
        profit_se: total.profit.standard_error(),
        buyer_surplus_mean: total.surplus.mean,
        buyer_surplus_se: total.surplus.standard_error(),
        trade_prob: total.trades as f64 / n as f64,
        n,
        seed,
    })
}

/// Grid search over `m` equally spaced prices on `[0, 1]` for the EAFP or EAO
/// objective. The cost law's left integral is rebuilt here from cdf values by
/// composite Simpson so the search shares no quadrature with the solvers.
pub fn brute_force_price(market: &Market, kind: MechanismKind, m: usize) -> Result<(f64, f64)> {
    if m < 100 {
        return Err(Error::InvalidArgument(format!(
            "brute-force grid needs at least 100 points, got {m}"
        )));
    }
    const SUB: usize = 8;
    let h = 1.0 / (m - 1) as f64;
    let cost = market.cost();
    let mut left = vec![0.0; m];
    for j in 1..m {
        let a = (j - 1) as f64 * h;
        let step = h / SUB as f64;
        let mut s = cost.cdf(a)? + cost.cdf((j as f64 * h).min(1.0))?;
        for k in 1..SUB {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * cost.cdf(a + k as f64 * step)?;
        }
        left[j] = left[j - 1] + s * step / 3.0;
    }
    let mean_cost = 1.0 - left[m - 1];
    let mut best = (0.0, f64::NEG_INFINITY);
    for (j, g) in left.iter().enumerate() {
        let p = (j as f64 * h).min(1.0);
        let survive = 1.0 - market.value().cdf(p)?;
        let v = match kind {
            MechanismKind::Eafp => survive * (p - mean_cost),
            MechanismKind::Eao => survive * g,
            other => {
                return Err(Error::Unsupported(format!(
                    "brute-force pricing covers EAFP and EAO, not {other}"
                )))
            }
        };
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> Market {
        Market::uniform()
    }

    #[test]
    fn at_will_examples() {
        let rule = OutcomeRule::AtWill { price: 2.0 / 3.0 };
        let out = rule.evaluate(0.8, 0.5);
        assert!(out.traded && out.stage == Stage::T0);
        assert_eq!(out.transfer, 2.0 / 3.0);
        let out = rule.evaluate(0.8, 0.9);
        assert!(out.canceled && !out.traded);
        assert_eq!(out.transfer, 0.0);
    }

    #[test]
    fn fixed_price_delivers_at_a_loss() {
        let out = OutcomeRule::FixedPrice { price: 0.75 }.evaluate(0.9, 0.95);
        assert!(out.traded);
        assert_eq!(out.transfer, 0.75);
    }

    #[test]
    fn dynamic_example() {
        let m = uniform();
        let sol = m.solve_dynamic(0.9).unwrap().solution;
        let rule = build_rule(&sol, &m).unwrap();
        for omega in [0.0, 0.5, 1.0] {
            let out = rule.evaluate(0.95, omega);
            assert_eq!(out.stage, Stage::T0);
            assert!((out.transfer - 0.735330064).abs() < 1e-6);
        }
        let out = rule.evaluate(0.8, 0.2);
        assert_eq!(out.stage, Stage::T1);
        assert!((out.transfer - (sol.theta_bar.unwrap() + 0.2) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn never_trading_is_exactly_zero() {
        let est = simulate(&OutcomeRule::Never, &uniform(), 0.5, 5000, 1).unwrap();
        assert_eq!(est.profit_mean, 0.0);
        assert_eq!(est.profit_se, 0.0);
        assert_eq!(est.trade_prob, 0.0);
    }

    #[test]
    fn too_few_draws() {
        assert!(simulate(&OutcomeRule::Never, &uniform(), 0.5, 999, 1).is_err());
    }

    #[test]
    fn deterministic_and_index_addressed() {
        let rule = OutcomeRule::AtWill { price: 2.0 / 3.0 };
        let a = simulate(&rule, &uniform(), 0.5, 40_000, 9).unwrap();
        let b = simulate(&rule, &uniform(), 0.5, 40_000, 9).unwrap();
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let seq: Vec<(f64, f64)> = (0..5).map(|_| (rng.random(), rng.random())).collect();
        for (i, pair) in seq.iter().enumerate() {
            assert_eq!(draw_uniforms(9, i as u64), *pair);
        }
    }

    #[test]
    fn eafp_uniform_within_three_se() {
        let m = uniform();
        let rule = build_rule(&m.solve_eafp().unwrap(), &m).unwrap();
        let est = simulate(&rule, &m, 0.5, 1_000_000, 42).unwrap();
        assert!(est.profit_agrees(0.0625, 3.0), "{est:?}");
    }

    #[test]
    fn epo_uniform_within_three_se() {
        let m = uniform();
        let rule = build_rule(&m.solve_epo(0.6).unwrap().0, &m).unwrap();
        let est = simulate(&rule, &m, 0.6, 1_000_000, 42).unwrap();
        assert!(est.profit_agrees(0.05, 3.0), "{est:?}");
    }

    #[test]
    fn brute_force_uniform() {
        let m = uniform();
        let (p, v) = brute_force_price(&m, MechanismKind::Eafp, 10_000).unwrap();
        assert!((p - 0.75).abs() < 1e-4);
        assert!((v - 0.0625).abs() < 1e-8);
        let (p, _) = brute_force_price(&m, MechanismKind::Eao, 10_000).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-4);
        assert!(brute_force_price(&m, MechanismKind::Eao, 50).is_err());
        assert!(brute_force_price(&m, MechanismKind::D, 500).is_err());
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(b);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 - whole.m2).abs() < 1e-8 * whole.m2);
    }
}
