//! Style indicators recovered from simulation logs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantile::Level;
use crate::scenario::{SimLog, TrafficScript};
use crate::styles::GgSample;

/// Default cornering threshold for the curve cutting regression, 1/m.
pub const DEFAULT_K_MIN: f64 = 0.002;
const MIN_REGRESSION_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CcgEstimate {
    pub ccg: f64,
    pub ccg0: f64,
    pub r2: f64,
    pub n: usize,
}

/// Least-squares fit of the curve-inside-signed offset on `|a_y|` over
/// cornering samples (`|k| >= k_min`). With `exclude_traffic`, rows with an
/// oncoming object in preview are skipped.
pub fn estimate_ccg(log: &SimLog, k_min: f64, exclude_traffic: bool) -> Result<CcgEstimate> {
    if !(k_min > 0.0) {
        return Err(Error::validation("k_min must be > 0"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = log
        .rows
        .iter()
        .filter(|r| r.k.abs() >= k_min)
        .filter(|r| !(exclude_traffic && r.d_traffic >= 0.0))
        .map(|r| (r.a_y.abs(), r.k.signum() * r.d_cl_actual))
        .unzip();
    if xs.len() < MIN_REGRESSION_SAMPLES {
        return Err(Error::InsufficientData {
            what: "cornering samples for curve cutting regression",
            needed: MIN_REGRESSION_SAMPLES,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= f64::EPSILON * n * mx.abs().max(1.0) {
        return Err(Error::DegenerateRegression("lateral acceleration has no variance".into()));
    }
    let ccg = sxy / sxx;
    let ccg0 = my - ccg * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(CcgEstimate {
        ccg,
        ccg0,
        r2,
        n: xs.len(),
    })
}

/// Acceleration envelope at `level`: positive `a_x`, braking `a_x` by
/// magnitude (sign restored) and `|a_y|`.
pub fn gg_percentiles(log: &SimLog, level: Level) -> Result<GgSample> {
    if log.is_empty() {
        return Err(Error::InsufficientData {
            what: "log rows",
            needed: 1,
            got: 0,
        });
    }
    let accel: Vec<f64> = log.rows.iter().map(|r| r.a_x).filter(|&a| a > 0.0).collect();
    let brake: Vec<f64> = log.rows.iter().map(|r| r.a_x).filter(|&a| a < 0.0).map(f64::abs).collect();
    let lateral: Vec<f64> = log.rows.iter().map(|r| r.a_y.abs()).collect();
    let need = |xs: &[f64], what| {
        if xs.is_empty() {
            Err(Error::InsufficientData { what, needed: 1, got: 0 })
        } else {
            Ok(())
        }
    };
    need(&accel, "accelerating samples")?;
    need(&brake, "braking samples")?;
    Ok(GgSample {
        ax_max: level.summarize(&accel)?,
        ax_min: -level.summarize(&brake)?,
        ay_max: level.summarize(&lateral)?,
    })
}

/// Lateral gap to the opposing-lane centerline when passing each
/// encounter: `lane_width - d_cl_actual` at the pass point, so a shift to
/// the right adds clearance.
///
/// Pass points are the ends of the traffic episodes in the log, matched
/// to the script in order.
pub fn traffic_clearance(log: &SimLog, script: &TrafficScript, lane_width: f64) -> Result<Vec<f64>> {
    let episodes = log.traffic_episodes();
    let mut out = Vec::with_capacity(script.encounters().len());
    let mut next = 0;
    for (i, e) in script.encounters().iter().enumerate() {
        let found = episodes[next..]
            .iter()
            .position(|&(b, _)| log.rows[b].s >= e.trigger_s - 1.0)
            .map(|p| next + p);
        let Some(j) = found else {
            return Err(Error::validation(format!(
                "encounter {i} at s = {} not covered by the log",
                e.trigger_s
            )));
        };
        let (_, end) = episodes[j];
        if end == log.len() {
            return Err(Error::validation(format!("log ends before encounter {i} is passed")));
        }
        out.push(lane_width - log.rows[end - 1].d_cl_actual);
        next = j + 1;
    }
    Ok(out)
}

/// Mean curve-inside-signed actual offset over cornering samples.
pub fn mean_inside_offset(log: &SimLog, k_min: f64) -> Result<f64> {
    let xs: Vec<f64> = log
        .rows
        .iter()
        .filter(|r| r.k.abs() >= k_min)
        .map(|r| r.k.signum() * r.d_cl_actual)
        .collect();
    crate::quantile::mean(&xs)
}

/// Copy of `log` with Gaussian noise of standard deviation `sigma` added to
/// `d_cl_actual`, for measurement-noise robustness checks.
pub fn with_offset_noise(log: &SimLog, sigma: f64, seed: u64) -> Result<SimLog> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::validation(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = log.clone();
    for r in &mut out.rows {
        r.d_cl_actual += normal.sample(&mut rng);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{LogRow, Weather};

    fn row(k: f64, a_x: f64, a_y: f64, d: f64) -> LogRow {
        LogRow {
            t: 0.0,
            s: 0.0,
            v: 20.0,
            a_x,
            a_y,
            k,
            d_cl_target: d,
            d_cl_actual: d,
            steer: 0.0,
            d_traffic: -1.0,
            weather: Weather::Dry,
            style: "synthetic".into(),
            d_cl_traffic: None,
        }
    }

    #[test]
    fn exact_line_is_recovered() {
        let log = SimLog {
            rows: (0..50)
                .map(|i| {
                    let a = 0.1 * i as f64;
                    row(0.01, 0.0, a, 0.1 * a + 0.02)
                })
                .collect(),
        };
        let e = estimate_ccg(&log, 0.002, true).unwrap();
        assert!((e.ccg - 0.1).abs() < 1e-9);
        assert!((e.ccg0 - 0.02).abs() < 1e-9);
        assert!((e.r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_or_flat_samples() {
        let few = SimLog {
            rows: (0..9).map(|i| row(0.01, 0.0, i as f64, 0.0)).collect(),
        };
        assert!(matches!(estimate_ccg(&few, 0.002, false), Err(Error::InsufficientData { .. })));
        let flat = SimLog {
            rows: (0..20).map(|_| row(0.01, 0.0, 2.0, 0.1)).collect(),
        };
        assert!(matches!(estimate_ccg(&flat, 0.002, false), Err(Error::DegenerateRegression(_))));
    }

    #[test]
    fn gg_partition_oracle() {
        let log = SimLog {
            rows: [-2.0, -1.0, 1.0, 2.0].into_iter().map(|a| row(0.0, a, 3.0, 0.0)).collect(),
        };
        let g = gg_percentiles(&log, Level::Percentile(50.0)).unwrap();
        assert_eq!(g.ax_max, 1.5);
        assert_eq!(g.ax_min, -1.5);
        assert_eq!(g.ay_max, 3.0);
        let no_brake = SimLog {
            rows: vec![row(0.0, 1.0, 0.0, 0.0)],
        };
        assert!(gg_percentiles(&no_brake, Level::Mean).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let log = SimLog {
            rows: (0..100).map(|i| row(0.01, 0.0, i as f64, 0.0)).collect(),
        };
        assert_eq!(with_offset_noise(&log, 0.05, 3).unwrap(), with_offset_noise(&log, 0.05, 3).unwrap());
        assert_ne!(with_offset_noise(&log, 0.05, 3).unwrap(), with_offset_noise(&log, 0.05, 4).unwrap());
    }
}
