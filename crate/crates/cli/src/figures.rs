use std::io::Write;

use mechlab::atwill::{solve_d1, solve_d2};
use mechlab::Market;
use rayon::prelude::*;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Prices,
    Profits,
    #[value(name = "appendix-c")]
    AtWill,
}

impl Figure {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Figure::Prices => &["delta", "p_eafp", "p_eao", "p0_d", "theta_bar_d"],
            Figure::Profits => &["delta", "pi_eafp", "pi_epo", "pi_eao", "pi_d"],
            Figure::AtWill => &["delta", "pi_eao", "pi_epo", "pi_d", "pi_d1", "pi_d2"],
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub p_eafp: f64,
    pub p_eao: f64,
    pub p0_d: f64,
    pub theta_bar_d: f64,
    pub pi_eafp: f64,
    pub pi_epo: f64,
    pub pi_eao: f64,
    pub pi_d: f64,
    pub pi_d1: Option<f64>,
    pub pi_d2: Option<f64>,
}

impl SweepRow {
    fn values(&self, figure: Figure) -> Vec<f64> {
        match figure {
            Figure::Prices => vec![
                self.delta,
                self.p_eafp,
                self.p_eao,
                self.p0_d,
                self.theta_bar_d,
            ],
            Figure::Profits => vec![
                self.delta,
                self.pi_eafp,
                self.pi_epo,
                self.pi_eao,
                self.pi_d,
            ],
            Figure::AtWill => vec![
                self.delta,
                self.pi_eao,
                self.pi_epo,
                self.pi_d,
                self.pi_d1.unwrap_or(f64::NAN),
                self.pi_d2.unwrap_or(f64::NAN),
            ],
        }
    }
}

/// Rows for every delta, computed in parallel and returned in input order.
pub fn sweep(market: &Market, deltas: &[f64], at_will: bool) -> Result<Vec<SweepRow>, CliError> {
    market.require_regular()?;
    let eafp = market.solve_eafp()?;
    let eao = market.solve_eao()?;
    deltas
        .par_iter()
        .map(|&delta| {
            let d = market.solve_dynamic(delta)?.solution;
            let (pi_d1, pi_d2) = if at_will {
                (
                    Some(solve_d1(market, delta)?.profit),
                    Some(solve_d2(market, delta)?.profit()),
                )
            } else {
                (None, None)
            };
            log::debug!("sweep row at delta = {delta}");
            Ok(SweepRow {
                delta,
                p_eafp: eafp.price0.unwrap_or(f64::NAN),
                p_eao: eao.price0.unwrap_or(f64::NAN),
                p0_d: d.price0.unwrap_or(f64::NAN),
                theta_bar_d: d.theta_bar.unwrap_or(f64::NAN),
                pi_eafp: eafp.profit,
                pi_epo: market.solve_epo(delta)?.0.profit,
                pi_eao: eao.profit,
                pi_d: d.profit,
                pi_d1,
                pi_d2,
            })
        })
        .collect()
}

/// Plain decimal with nine significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else {
            format!("{x}")
        };
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_csv<W: Write>(out: W, figure: Figure, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    writer.write_record(figure.header()).map_err(io)?;
    for row in rows {
        writer
            .write_record(row.values(figure).into_iter().map(format_sig))
            .map_err(io)?;
    }
    writer.flush().map_err(|e| CliError::Io(e.to_string()))
}
