use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Uniform sampling grid `min, min + h, ..., max` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        let g = GridSpec { min, max, n };
        g.validate("grid")?;
        Ok(g)
    }

    /// Checks the grid invariants, naming `field` in the error.
    pub fn validate(&self, field: &str) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidGrid {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if !self.min.is_finite() || !self.max.is_finite() {
            return bad("bounds must be finite");
        }
        if self.n < 2 {
            return bad(&format!("n must be at least 2 (got {})", self.n));
        }
        if self.max <= self.min {
            return bad(&format!("max ({}) must exceed min ({})", self.max, self.min));
        }
        if self.spacing() <= 0.0 {
            return bad("spacing underflows to zero");
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    /// Centered grid covering `center ± half_width`.
    pub fn centered(center: f64, half_width: f64, n: usize) -> Result<Self> {
        GridSpec::new(center - half_width, center + half_width, n)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.n)
    }
}

/// Parses the `MIN:MAX:N` form used on the command line.
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |reason: String| Error::InvalidGrid {
            field: "grid".into(),
            reason,
        };
        if parts.len() != 3 {
            return Err(bad(format!("expected MIN:MAX:N, got `{s}`")));
        }
        let min = parts[0]
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("MIN `{}`: {e}", parts[0])))?;
        let max = parts[1]
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("MAX `{}`: {e}", parts[1])))?;
        let n = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| bad(format!("N `{}`: {e}", parts[2])))?;
        GridSpec::new(min, max, n)
    }
}

/// Composite trapezoid rule over uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}
