use std::path::Path;
use std::str::FromStr;

use mechlab::{Distribution, DistributionSpec, Market};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Seller,
    Buyer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for DeltaGrid {
    fn default() -> Self {
        DeltaGrid {
            min: 0.01,
            max: 0.99,
            steps: 99,
        }
    }
}

impl DeltaGrid {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.min > 0.0 && self.max < 1.0 && self.min < self.max) {
            return Err(CliError::Config(format!(
                "delta grid needs 0 < min < max < 1, got {}:{}",
                self.min, self.max
            )));
        }
        if self.steps < 2 {
            return Err(CliError::Config(format!(
                "delta grid needs at least 2 steps, got {}",
                self.steps
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + i as f64 * h
                }
            })
            .collect()
    }
}

impl FromStr for DeltaGrid {
    type Err = String;

    /// Parses `min:max:steps`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, steps] = parts[..] else {
            return Err(format!("expected min:max:steps, got `{s}`"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        Ok(DeltaGrid {
            min: num(min)?,
            max: num(max)?,
            steps: steps
                .trim()
                .parse()
                .map_err(|e| format!("`{steps}`: {e}"))?,
        })
    }
}

/// Settings shared by every command; command-line flags override the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "F", default)]
    pub value: DistributionSpec,
    #[serde(rename = "G", default)]
    pub cost: DistributionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<DeltaGrid>,
    #[serde(default)]
    pub side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sim: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn market(&self) -> Result<Market, CliError> {
        let law = |spec: &DistributionSpec, name: &str| {
            Distribution::new(spec.clone()).map_err(|e| CliError::Config(format!("{name}: {e}")))
        };
        Ok(Market::new(law(&self.value, "F")?, law(&self.cost, "G")?))
    }

    fn check_exclusive(&self) -> Result<(), CliError> {
        if self.delta.is_some() && self.delta_grid.is_some() {
            return Err(CliError::Config(
                "give either delta or delta_grid, not both".into(),
            ));
        }
        Ok(())
    }

    /// The single discount factor, if one is configured.
    pub fn single_delta(&self) -> Result<Option<f64>, CliError> {
        self.check_exclusive()?;
        if self.delta_grid.is_some() {
            return Err(CliError::Config(
                "this command takes a single delta, not a grid".into(),
            ));
        }
        match self.delta {
            Some(d) if !(0.0..=1.0).contains(&d) => Err(CliError::Config(format!(
                "delta must lie in [0, 1], got {d}"
            ))),
            d => Ok(d),
        }
    }

    pub fn require_delta(&self, what: &str) -> Result<f64, CliError> {
        self.single_delta()?
            .ok_or_else(|| CliError::Config(format!("{what} needs --delta")))
    }

    /// Grid for sweeps: the configured one, a single configured delta, or the default.
    pub fn sweep_deltas(&self) -> Result<Vec<f64>, CliError> {
        self.check_exclusive()?;
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(CliError::Config(format!(
                    "delta must lie in (0, 1), got {d}"
                )));
            }
            return Ok(vec![d]);
        }
        let grid = self.delta_grid.unwrap_or_default();
        grid.validate()?;
        Ok(grid.points())
    }
}
