//! Driving-style parameter registry and the replay pseudo-style.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::Level;

/// Names accepted by [`builtin_style`].
pub const BUILTIN_STYLES: [&str; 3] = ["passive", "rail", "sportive"];

/// Full parameter vector of one driving style: curve cutting
/// (`ccg`, `ccg0`), oncoming-traffic reaction (`rho_t`, `d_t0`) and the
/// acceleration envelope (`ax_max`, `ax_min`, `ay_max`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    pub name: String,
    /// Curve cutting gradient, m per m/s².
    pub ccg: f64,
    /// Global curve cutting offset, m.
    pub ccg0: f64,
    /// Oncoming traffic preview distance, m.
    pub rho_t: f64,
    /// Lateral offset reached when abreast of an oncoming vehicle, m.
    pub d_t0: f64,
    pub ax_max: f64,
    pub ax_min: f64,
    pub ay_max: f64,
}

impl StyleParams {
    pub fn passive() -> Self {
        StyleParams {
            name: "passive".into(),
            ccg: 0.042,
            ccg0: -0.09,
            rho_t: 80.0,
            d_t0: -0.218,
            ax_max: 2.108,
            ax_min: -3.104,
            ay_max: 3.90,
        }
    }

    pub fn rail() -> Self {
        StyleParams {
            name: "rail".into(),
            ccg: 0.0,
            ccg0: 0.0,
            rho_t: 80.0,
            d_t0: 0.0,
            ax_max: 3.206,
            ax_min: -3.916,
            ay_max: 4.731,
        }
    }

    pub fn sportive() -> Self {
        StyleParams {
            name: "sportive".into(),
            ccg: 0.141,
            ccg0: 0.135,
            rho_t: 80.0,
            d_t0: -0.01,
            ax_max: 4.235,
            ax_min: -4.847,
            ay_max: 5.653,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.ccg, self.ccg0, self.rho_t, self.d_t0, self.ax_max, self.ax_min, self.ay_max,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("style '{}': non-finite parameter", self.name)));
        }
        if self.rho_t <= 0.0 {
            return Err(Error::validation(format!("style '{}': rho_t must be > 0", self.name)));
        }
        if self.d_t0 > 0.0 {
            return Err(Error::validation(format!("style '{}': d_t0 must be <= 0", self.name)));
        }
        if !(self.ax_min < 0.0 && 0.0 < self.ax_max) {
            return Err(Error::validation(format!(
                "style '{}': need ax_min < 0 < ax_max",
                self.name
            )));
        }
        if self.ay_max <= 0.0 {
            return Err(Error::validation(format!("style '{}': ay_max must be > 0", self.name)));
        }
        Ok(())
    }

    /// Traffic ramp gradient `d_t0 / rho_t` (nonpositive).
    pub fn traffic_gradient(&self) -> f64 {
        self.d_t0 / self.rho_t
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let style: StyleParams = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        style.validate()?;
        Ok(style)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("style params serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

pub fn builtin_style(name: &str) -> Result<StyleParams> {
    match name {
        "passive" => Ok(StyleParams::passive()),
        "rail" => Ok(StyleParams::rail()),
        "sportive" => Ok(StyleParams::sportive()),
        other => Err(Error::Lookup {
            kind: "style",
            name: other.to_string(),
        }),
    }
}

/// Per-driver curve cutting estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub ccg: f64,
    pub ccg0: f64,
}

/// Per-driver acceleration envelope estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgSample {
    pub ax_max: f64,
    pub ax_min: f64,
    pub ay_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficParams {
    pub rho_t: f64,
    pub d_t0: f64,
}

/// Assembles a style from a population of per-driver estimates at one
/// summary level. `ax_min` is summarized by magnitude, so a higher
/// percentile yields harder braking.
pub fn style_from_percentiles(
    name: &str,
    curve: &[CurveSample],
    gg: &[GgSample],
    traffic: TrafficParams,
    level: Level,
) -> Result<StyleParams> {
    if curve.is_empty() || gg.is_empty() {
        return Err(Error::validation("style derivation needs nonempty sample sets"));
    }
    let pick = |xs: Vec<f64>| level.summarize(&xs);
    let style = StyleParams {
        name: name.to_string(),
        ccg: pick(curve.iter().map(|c| c.ccg).collect())?,
        ccg0: pick(curve.iter().map(|c| c.ccg0).collect())?,
        rho_t: traffic.rho_t,
        d_t0: traffic.d_t0,
        ax_max: pick(gg.iter().map(|g| g.ax_max).collect())?,
        ax_min: -pick(gg.iter().map(|g| g.ax_min.abs()).collect())?,
        ay_max: pick(gg.iter().map(|g| g.ay_max).collect())?,
    };
    style.validate()?;
    Ok(style)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplaySample {
    pub s: f64,
    pub d_cl: f64,
    pub v: f64,
}

/// Recorded `(s, d_cl, v)` trace fed back as control targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTrace {
    samples: Vec<ReplaySample>,
}

impl ReplayTrace {
    pub fn new(samples: Vec<ReplaySample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("replay trace is empty"));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].s <= w[0].s {
                return Err(Error::validation(format!(
                    "replay trace s not strictly increasing at sample {}",
                    i + 1
                )));
            }
        }
        if samples
            .iter()
            .any(|p| !(p.s.is_finite() && p.d_cl.is_finite() && p.v.is_finite()) || p.v < 0.0)
        {
            return Err(Error::validation("replay trace has non-finite or negative-speed samples"));
        }
        Ok(ReplayTrace { samples })
    }

    pub fn samples(&self) -> &[ReplaySample] {
        &self.samples
    }

    /// Interpolated `(d_cl, v)` at `s`, clamped to the end samples.
    pub fn at(&self, s: f64) -> (f64, f64) {
        let xs = &self.samples;
        let first = xs[0];
        let last = xs[xs.len() - 1];
        if s <= first.s {
            return (first.d_cl, first.v);
        }
        if s >= last.s {
            return (last.d_cl, last.v);
        }
        let i = xs.partition_point(|p| p.s <= s);
        let (a, b) = (xs[i - 1], xs[i]);
        let f = (s - a.s) / (b.s - a.s);
        (a.d_cl + f * (b.d_cl - a.d_cl), a.v + f * (b.v - a.v))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["s", "d_cl", "v"])?;
        for p in &self.samples {
            w.write_record([p.s.to_string(), p.d_cl.to_string(), p.v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut samples = Vec::new();
        for rec in r.deserialize() {
            samples.push(rec?);
        }
        ReplayTrace::new(samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_style_is_lookup_error() {
        assert!(matches!(builtin_style("reckless"), Err(Error::Lookup { .. })));
    }

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_STYLES {
            builtin_style(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn traffic_gradient_of_passive() {
        assert!((StyleParams::passive().traffic_gradient() + 0.002725).abs() < 1e-15);
    }

    #[test]
    fn toml_round_trip() {
        let s = StyleParams::sportive();
        assert_eq!(StyleParams::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn invalid_style_file_rejected() {
        let mut s = StyleParams::passive();
        s.d_t0 = 0.3;
        assert!(StyleParams::from_toml(&s.to_toml()).is_err());
        assert!(StyleParams::from_toml("name = 'x'").is_err());
    }

    #[test]
    fn percentile_assembly() {
        let curve: Vec<CurveSample> = (1..=100)
            .map(|i| CurveSample {
                ccg: i as f64,
                ccg0: -(i as f64),
            })
            .collect();
        let gg: Vec<GgSample> = (1..=100)
            .map(|i| GgSample {
                ax_max: i as f64,
                ax_min: -(i as f64),
                ay_max: i as f64,
            })
            .collect();
        let traffic = TrafficParams {
            rho_t: 80.0,
            d_t0: -0.2,
        };
        let p15 = style_from_percentiles("p15", &curve, &gg, traffic, Level::Percentile(15.0)).unwrap();
        assert!((p15.ccg - 15.85).abs() < 1e-12);
        assert!((p15.ax_min + 15.85).abs() < 1e-12);
        assert!((p15.ccg0 + 85.15).abs() < 1e-12);
        let m = style_from_percentiles("m", &curve, &gg, traffic, Level::Mean).unwrap();
        assert!((m.ay_max - 50.5).abs() < 1e-12);
        assert!(style_from_percentiles("e", &[], &gg, traffic, Level::Mean).is_err());
    }

    #[test]
    fn replay_trace_interpolates_and_clamps() {
        let t = ReplayTrace::new(vec![
            ReplaySample { s: 0.0, d_cl: 0.0, v: 10.0 },
            ReplaySample { s: 10.0, d_cl: -0.2, v: 20.0 },
        ])
        .unwrap();
        assert_eq!(t.at(5.0), (-0.1, 15.0));
        assert_eq!(t.at(-3.0), (0.0, 10.0));
        assert_eq!(t.at(30.0), (-0.2, 20.0));
        assert!(ReplayTrace::new(vec![
            ReplaySample { s: 1.0, d_cl: 0.0, v: 1.0 },
            ReplaySample { s: 1.0, d_cl: 0.0, v: 1.0 },
        ])
        .is_err());
    }
}
