//! Energy per Mbit as a decaying exponential of link throughput.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `eps(x) = amplitude * exp(-decay * x)`, joule/Mbit at `x` Mbit/slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCurve {
    pub amplitude: f64,
    pub decay: f64,
}

impl EnergyCurve {
    /// Fit to handset measurements.
    pub const F1: EnergyCurve = EnergyCurve {
        amplitude: 1.4274,
        decay: 0.063,
    };
    /// A more efficient radio: below `F1` everywhere on `x >= 0`.
    pub const F2: EnergyCurve = EnergyCurve {
        amplitude: 1.4,
        decay: 0.09,
    };

    pub fn new(amplitude: f64, decay: f64) -> Result<Self> {
        let curve = Self { amplitude, decay };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Domain(format!("amplitude {} must be positive", self.amplitude)));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::Domain(format!("decay {} must be positive", self.decay)));
        }
        Ok(())
    }

    pub fn eval(&self, throughput: f64) -> f64 {
        self.amplitude * (-self.decay * throughput).exp()
    }
}

/// Which curve prices energy in generated scenarios.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveChoice {
    #[default]
    F1,
    F2,
    Custom(EnergyCurve),
}

impl CurveChoice {
    pub fn curve(&self) -> EnergyCurve {
        match self {
            CurveChoice::F1 => EnergyCurve::F1,
            CurveChoice::F2 => EnergyCurve::F2,
            CurveChoice::Custom(c) => *c,
        }
    }
}

/// Least squares on `ln eps = ln A - d x`.
pub fn fit_energy_curve(samples: &[(f64, f64)]) -> Result<EnergyCurve> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    for &(x, e) in samples {
        if !(x > 0.0 && e > 0.0 && x.is_finite() && e.is_finite()) {
            return Err(Error::Domain(format!(
                "sample ({x}, {e}) must have positive throughput and energy"
            )));
        }
    }
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, e) in samples {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (e.ln() - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::Domain("all samples share one throughput".into()));
    }
    let slope = sxy / sxx;
    let curve = EnergyCurve {
        amplitude: (mean_y - slope * mean_x).exp(),
        decay: -slope,
    };
    curve
        .validate()
        .map_err(|_| Error::Domain(format!("samples do not decrease with throughput (slope {slope})")))?;
    Ok(curve)
}

/// Sum of squared residuals of `ln eps` under `curve`.
pub fn log_residual(curve: &EnergyCurve, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(x, e)| {
            let r = e.ln() - curve.eval(x).ln();
            r * r
        })
        .sum()
}

/// Parse `throughput,energy` lines. Blank lines, `#` comments and a
/// non-numeric header line are skipped.
pub fn parse_samples(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', '\t', ' ']).filter(|f| !f.is_empty()).collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!("line {}: expected two fields", n + 1)));
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(e)) => out.push((x, e)),
            _ if out.is_empty() && n == 0 => continue,
            _ => return Err(Error::Parse(format!("line {}: not a number pair", n + 1))),
        }
    }
    Ok(out)
}
