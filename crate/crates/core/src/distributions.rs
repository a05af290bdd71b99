//! Value and cost laws on `[0, 1]` together with the derived quantities every
//! solver needs: the left integral of the cdf, truncated means, and the
//! virtual valuation / virtual cost transforms.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// Strictness tolerance for successive virtual-valuation differences.
pub const REGULARITY_TOL: f64 = 1e-12;

/// Serializable description of a law on `[0, 1]`.
///
/// The JSON form is tagged by `family`:
/// `{"family":"uniform"}`, `{"family":"power","k":2.0}` or
/// `{"family":"tabulated","cdf":[0.0, ..., 1.0]}` where the tabulated cdf is
/// sampled on an equally spaced grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DistributionSpec {
    #[default]
    Uniform,
    Power {
        k: f64,
    },
    Tabulated {
        cdf: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    cdf: Vec<f64>,
    step: f64,
    slopes: Vec<f64>,
    /// Left integral of the cdf at each knot.
    left: Vec<f64>,
}

impl Table {
    fn new(cdf: Vec<f64>) -> Result<Self> {
        if cdf.len() < 2 {
            return Err(Error::InvalidDistribution(
                "tabulated cdf needs at least two samples".into(),
            ));
        }
        if let Some(bad) = cdf.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "tabulated cdf contains a non-finite sample {bad}"
            )));
        }
        if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::InvalidDistribution(
                "tabulated cdf must start at 0 and end at 1".into(),
            ));
        }
        if let Some(i) = cdf.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDistribution(format!(
                "tabulated cdf is not strictly increasing between samples {i} and {}",
                i + 1
            )));
        }
        let step = 1.0 / (cdf.len() - 1) as f64;
        let slopes: Vec<f64> = cdf.windows(2).map(|w| (w[1] - w[0]) / step).collect();
        let mut left = Vec::with_capacity(cdf.len());
        left.push(0.0);
        for w in cdf.windows(2) {
            let last = *left.last().unwrap();
            left.push(last + 0.5 * step * (w[0] + w[1]));
        }
        Ok(Self {
            cdf,
            step,
            slopes,
            left,
        })
    }

    /// Segment index and offset within it.
    fn locate(&self, x: f64) -> (usize, f64) {
        let last = self.slopes.len() - 1;
        let i = ((x / self.step).floor() as usize).min(last);
        (i, x - i as f64 * self.step)
    }

    fn cdf(&self, x: f64) -> f64 {
        let (i, dx) = self.locate(x);
        (self.cdf[i] + self.slopes[i] * dx).min(1.0)
    }

    fn pdf(&self, x: f64) -> f64 {
        let (i, dx) = self.locate(x);
        if dx == 0.0 && i > 0 {
            0.5 * (self.slopes[i - 1] + self.slopes[i])
        } else {
            self.slopes[i]
        }
    }

    fn left_integral(&self, x: f64) -> f64 {
        let (i, dx) = self.locate(x);
        self.left[i] + self.cdf[i] * dx + 0.5 * self.slopes[i] * dx * dx
    }

    fn quantile(&self, u: f64) -> f64 {
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let x = i as f64 * self.step + (u - self.cdf[i]) / self.slopes[i];
        x.clamp(0.0, 1.0)
    }

    fn knots(&self) -> Vec<f64> {
        (1..self.cdf.len() - 1)
            .map(|i| i as f64 * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    /// cdf `x^k`; uniform is `k = 1`.
    Power(f64),
    Tabulated(Table),
}

/// An immutable, validated law on `[0, 1]` with a strictly increasing cdf.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    spec: DistributionSpec,
    law: Law,
}

/// Outcome of [`Distribution::check_regular`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularity {
    pub regular: bool,
    /// First adjacent grid pair where `psi(., 1)` failed to increase.
    pub violation: Option<(f64, f64)>,
}

impl Distribution {
    pub fn new(spec: DistributionSpec) -> Result<Self> {
        let law = match &spec {
            DistributionSpec::Uniform => Law::Power(1.0),
            DistributionSpec::Power { k } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "power exponent must be positive and finite, got {k}"
                    )));
                }
                Law::Power(*k)
            }
            DistributionSpec::Tabulated { cdf } => Law::Tabulated(Table::new(cdf.clone())?),
        };
        Ok(Self { spec, law })
    }

    pub fn uniform() -> Self {
        Self {
            spec: DistributionSpec::Uniform,
            law: Law::Power(1.0),
        }
    }

    pub fn power(k: f64) -> Result<Self> {
        Self::new(DistributionSpec::Power { k })
    }

    pub fn tabulated(cdf: Vec<f64>) -> Result<Self> {
        Self::new(DistributionSpec::Tabulated { cdf })
    }

    /// Samples `cdf` at `samples` equally spaced points and tabulates it.
    pub fn tabulate<F: Fn(f64) -> f64>(cdf: F, samples: usize) -> Result<Self> {
        let n = samples.max(2);
        let mut grid: Vec<f64> = (0..n).map(|i| cdf(i as f64 / (n - 1) as f64)).collect();
        grid[0] = 0.0;
        grid[n - 1] = 1.0;
        Self::tabulated(grid)
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    /// True for the uniform law, whether given as `uniform` or `power(1)`.
    pub fn is_uniform(&self) -> bool {
        matches!(self.law, Law::Power(k) if k == 1.0)
    }

    /// Points where the density may jump (tabulated knots); empty otherwise.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.law {
            Law::Power(_) => Vec::new(),
            Law::Tabulated(t) => t.knots(),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.cdf_at(x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.pdf_at(x))
    }

    /// `∫_0^x cdf(y) dy`.
    pub fn left_integral(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.left_integral_at(x))
    }

    pub fn mean(&self) -> f64 {
        match &self.law {
            Law::Power(k) => k / (k + 1.0),
            Law::Tabulated(t) => 1.0 - t.left[t.left.len() - 1],
        }
    }

    /// `E[X | X < x] = x - L(x) / cdf(x)` with `L` the left integral.
    pub fn truncated_mean_below(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        let mass = self.cdf_at(x);
        if mass <= 0.0 {
            return Err(Error::UndefinedConditional { at: x });
        }
        Ok(x - self.left_integral_at(x) / mass)
    }

    /// Virtual valuation of the law truncated to `[0, theta_bar]`:
    /// `theta - (F(theta_bar) - F(theta)) / f(theta)`.
    pub fn virtual_valuation(&self, theta: f64, theta_bar: f64) -> Result<f64> {
        if !(theta_bar > 0.0 && theta_bar <= 1.0) {
            return Err(Error::Domain {
                what: "theta_bar",
                value: theta_bar,
                domain: "(0, 1]",
            });
        }
        if !(0.0..=theta_bar).contains(&theta) {
            return Err(Error::Domain {
                what: "theta",
                value: theta,
                domain: "[0, theta_bar]",
            });
        }
        let density = self.pdf_at(theta);
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::ZeroDensity { at: theta });
        }
        Ok(self.psi(theta, theta_bar))
    }

    /// Virtual cost `omega + G(omega) / g(omega)`.
    pub fn virtual_cost(&self, omega: f64) -> Result<f64> {
        check_unit("omega", omega)?;
        let density = self.pdf_at(omega);
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::ZeroDensity { at: omega });
        }
        Ok(omega + self.cdf_at(omega) / density)
    }

    /// Checks that `psi(theta, 1)` strictly increases across an `n`-point
    /// uniform grid, skipping grid points where the density is zero or
    /// unbounded.
    pub fn check_regular(&self, n: usize) -> Regularity {
        let n = n.max(2);
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..n {
            let theta = i as f64 / (n - 1) as f64;
            let density = self.pdf_at(theta);
            if !(density > 0.0 && density.is_finite()) {
                continue;
            }
            let value = self.psi(theta, 1.0);
            if let Some((prev_theta, prev_value)) = prev {
                if !(value - prev_value > REGULARITY_TOL) {
                    return Regularity {
                        regular: false,
                        violation: Some((prev_theta, theta)),
                    };
                }
            }
            prev = Some((theta, value));
        }
        Regularity {
            regular: true,
            violation: None,
        }
    }

    /// Inverse cdf, used for inverse-transform sampling.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.law {
            Law::Power(k) if *k == 1.0 => u,
            Law::Power(k) => u.powf(1.0 / k),
            Law::Tabulated(t) => t.quantile(u),
        }
    }

    // Unchecked evaluators; arguments are clamped into [0, 1].

    pub(crate) fn cdf_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.law {
            Law::Power(k) if *k == 1.0 => x,
            Law::Power(k) => x.powf(*k),
            Law::Tabulated(t) => t.cdf(x),
        }
    }

    pub(crate) fn pdf_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.law {
            Law::Power(k) if *k == 1.0 => 1.0,
            Law::Power(k) => k * x.powf(k - 1.0),
            Law::Tabulated(t) => t.pdf(x),
        }
    }

    pub(crate) fn left_integral_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.law {
            Law::Power(k) if *k == 1.0 => 0.5 * x * x,
            Law::Power(k) => x.powf(k + 1.0) / (k + 1.0),
            Law::Tabulated(t) => t.left_integral(x),
        }
    }

    /// `psi(theta, theta_bar)`; `-inf` where the density vanishes.
    pub(crate) fn psi(&self, theta: f64, theta_bar: f64) -> f64 {
        let gap = self.cdf_at(theta_bar) - self.cdf_at(theta);
        if gap == 0.0 {
            return theta;
        }
        let density = self.pdf_at(theta);
        if density <= 0.0 {
            return f64::NEG_INFINITY;
        }
        theta - gap / density
    }
}
