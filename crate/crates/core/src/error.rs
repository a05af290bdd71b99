use thiserror::Error;

/// Errors raised by the distribution layer, the numerical kernels and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("density vanishes at {at}; the virtual transform is undefined there")]
    ZeroDensity { at: f64 },

    #[error("conditional expectation below {at} is undefined (zero mass)")]
    UndefinedConditional { at: f64 },

    #[error("value distribution is not regular: virtual valuation fails to increase between {from} and {to}")]
    NotRegular { from: f64, to: f64 },

    #[error("no sign change on [{a}, {b}] (f(a) = {fa}, f(b) = {fb})")]
    Bracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("non-finite objective value at {at}")]
    NonFinite { at: f64 },

    #[error("threshold {name} not found: {reason}")]
    ThresholdNotFound { name: &'static str, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}

pub(crate) fn check_discount(delta: f64) -> Result<()> {
    check_unit("delta", delta)
}

pub(crate) fn check_open_discount(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "delta",
            value: delta,
            domain: "(0, 1)",
        })
    }
}
