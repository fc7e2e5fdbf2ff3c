//! Adaptive curve cutting with oncoming-traffic shift.
//!
//! The target lateral offset is the pointwise minimum of a curve-cutting
//! term, affine in the previewed lateral acceleration, and a rate-limited
//! traffic term that ramps to the right while an oncoming vehicle is in
//! preview. Offsets are signed positive to the left.

use serde::{Deserialize, Serialize};

use crate::styles::StyleParams;

/// Per-run mutable state of the traffic branch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BehaviorState {
    /// Rate-limited traffic offset emitted on the previous tick, in `[d_t0, 0]`.
    pub d_cl_t_prev: f64,
    /// Arc length at the previous tick.
    pub s_prev: f64,
}

impl BehaviorState {
    pub fn at(s: f64) -> Self {
        BehaviorState {
            d_cl_t_prev: 0.0,
            s_prev: s,
        }
    }
}

/// Longitudinal gap to the closest oncoming object in preview, if any.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrafficObservation(Option<f64>);

impl TrafficObservation {
    pub fn none() -> Self {
        TrafficObservation(None)
    }

    /// Observation at gap `d_traffic` (negative gaps clamp to zero).
    pub fn at(d_traffic: f64) -> Self {
        TrafficObservation(Some(d_traffic.max(0.0)))
    }

    pub fn distance(self) -> Option<f64> {
        self.0
    }

    pub fn is_present(self) -> bool {
        self.0.is_some()
    }
}

/// Shape of the traffic shift as a function of the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficShape {
    /// `d_t0 * (1 - d / rho_t)` clamped to `[d_t0, 0]`: zero at detection,
    /// `d_t0` when abreast.
    #[default]
    Ramp,
    /// `min(grad * d + d_t0, 0)` with `grad = d_t0 / rho_t`, evaluated as
    /// written. Kept for comparison runs only; it is largest at detection.
    Literal,
}

/// Unit in which the traffic-offset rate limit is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "basis")]
pub enum RateLimitBasis {
    /// `0.5 |grad|` per behavior tick of `tick` seconds; fractional ticks
    /// scale linearly so the limit is a rate independent of the sim `dt`.
    PerTick { tick: f64 },
    /// `0.5 |grad|` per meter travelled.
    PerMeter,
}

impl Default for RateLimitBasis {
    fn default() -> Self {
        RateLimitBasis::PerTick { tick: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorConfig {
    /// Curvature preview horizon, seconds (sampled at `s + v * preview_time`).
    pub preview_time: f64,
    pub traffic_shape: TrafficShape,
    pub rate_basis: RateLimitBasis,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        BehaviorConfig {
            preview_time: 1.0,
            traffic_shape: TrafficShape::Ramp,
            rate_basis: RateLimitBasis::default(),
        }
    }
}

impl BehaviorConfig {
    /// Step size in rate-limit units for a tick that moved `ds` meters in
    /// `dt` seconds.
    pub fn rate_units(&self, ds: f64, dt: f64) -> f64 {
        match self.rate_basis {
            RateLimitBasis::PerTick { tick } => dt / tick,
            RateLimitBasis::PerMeter => ds.max(0.0),
        }
    }
}

/// Lateral acceleration expected at curvature `k` and speed `v`.
pub fn lateral_accel_preview(k: f64, v: f64) -> f64 {
    k * v * v
}

/// Curve-cutting offset. The gradient acts on `|a_y|` and the result is
/// mirrored toward the curve inside, so positive `ccg`/`ccg0` cut in left
/// and right curves alike. Zero on straights.
pub fn curve_cut_offset(style: &StyleParams, a_y: f64) -> f64 {
    if a_y == 0.0 {
        return 0.0;
    }
    a_y.signum() * (a_y.abs() * style.ccg + style.ccg0)
}

/// Unlimited traffic offset for the default ramp shape.
pub fn traffic_offset(style: &StyleParams, obs: TrafficObservation) -> f64 {
    traffic_offset_with(style, obs, TrafficShape::Ramp)
}

pub fn traffic_offset_with(style: &StyleParams, obs: TrafficObservation, shape: TrafficShape) -> f64 {
    let Some(d) = obs.distance() else {
        return 0.0;
    };
    match shape {
        TrafficShape::Ramp => (style.d_t0 * (1.0 - d / style.rho_t)).clamp(style.d_t0, 0.0),
        TrafficShape::Literal => (style.traffic_gradient() * d + style.d_t0).min(0.0),
    }
}

/// Clamps `raw` into `prev ± 0.5 |gradient| * units` and stores the result.
pub fn rate_limit_traffic_offset(
    state: &mut BehaviorState,
    raw: f64,
    traffic_gradient: f64,
    units: f64,
) -> f64 {
    let band = 0.5 * traffic_gradient.abs() * units.max(0.0);
    let prev = state.d_cl_t_prev;
    let limited = raw.clamp(prev - band, prev + band);
    state.d_cl_t_prev = limited;
    limited
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorInput {
    /// Preview curvature, 1/m.
    pub k: f64,
    pub v: f64,
    pub obs: TrafficObservation,
    /// Current arc length.
    pub s: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorOutput {
    /// Final target offset.
    pub d_cl: f64,
    pub d_cl_ccg: f64,
    /// Rate-limited traffic offset.
    pub d_cl_t: f64,
    /// Whether the traffic branch constrained the minimum this tick.
    pub traffic_active: bool,
}

/// One behavior tick: curve cutting, traffic shift, rate limit, minimum.
///
/// The traffic branch takes part in the minimum while an oncoming object is
/// observed and while its offset is still releasing back to zero afterwards;
/// with no traffic at all the curve-cutting term passes through unchanged.
pub fn target_offset(
    style: &StyleParams,
    input: &BehaviorInput,
    state: &mut BehaviorState,
    cfg: &BehaviorConfig,
) -> BehaviorOutput {
    let a_y = lateral_accel_preview(input.k, input.v);
    let d_cl_ccg = curve_cut_offset(style, a_y);
    let raw = traffic_offset_with(style, input.obs, cfg.traffic_shape);
    let ds = input.s - state.s_prev;
    let units = cfg.rate_units(ds, input.dt);
    let d_cl_t = rate_limit_traffic_offset(state, raw, style.traffic_gradient(), units);
    state.s_prev = input.s;
    let traffic_active = input.obs.is_present() || d_cl_t < 0.0;
    let d_cl = if traffic_active { d_cl_ccg.min(d_cl_t) } else { d_cl_ccg };
    BehaviorOutput {
        d_cl,
        d_cl_ccg,
        d_cl_t,
        traffic_active,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn preview_accel() {
        assert!(close(lateral_accel_preview(0.01, 20.0), 4.0));
        assert_eq!(lateral_accel_preview(0.0, 33.0), 0.0);
        assert!(close(lateral_accel_preview(-0.005, 10.0), -0.5));
    }

    #[test]
    fn curve_cut_examples() {
        assert!(close(curve_cut_offset(&StyleParams::sportive(), 4.0), 4.0 * 0.141 + 0.135));
        assert!(close(curve_cut_offset(&StyleParams::sportive(), 4.0), 0.699));
        assert!(close(curve_cut_offset(&StyleParams::passive(), 3.0), 0.036));
        assert!(close(curve_cut_offset(&StyleParams::passive(), -3.0), -0.036));
        for a in [-5.0, 0.0, 2.0] {
            assert_eq!(curve_cut_offset(&StyleParams::rail(), a), 0.0);
        }
        assert_eq!(curve_cut_offset(&StyleParams::sportive(), 0.0), 0.0);
    }

    #[test]
    fn traffic_ramp_examples() {
        let p = StyleParams::passive();
        assert_eq!(traffic_offset(&p, TrafficObservation::at(80.0)), 0.0);
        assert!(close(traffic_offset(&p, TrafficObservation::at(40.0)), -0.218 * (1.0 - 40.0 / 80.0)));
        assert!(close(traffic_offset(&p, TrafficObservation::at(40.0)), -0.109));
        assert!(close(traffic_offset(&p, TrafficObservation::at(0.0)), -0.218));
        assert_eq!(traffic_offset(&p, TrafficObservation::none()), 0.0);
        for d in [0.0, 10.0, 80.0] {
            assert_eq!(traffic_offset(&StyleParams::rail(), TrafficObservation::at(d)), 0.0);
        }
    }

    #[test]
    fn literal_shape_is_largest_at_detection() {
        let p = StyleParams::passive();
        let far = traffic_offset_with(&p, TrafficObservation::at(80.0), TrafficShape::Literal);
        let near = traffic_offset_with(&p, TrafficObservation::at(0.0), TrafficShape::Literal);
        assert!(close(far, -0.436));
        assert!(close(near, -0.218));
    }

    #[test]
    fn rate_limit_examples() {
        let mut st = BehaviorState { d_cl_t_prev: 0.0, s_prev: 0.0 };
        assert!(close(rate_limit_traffic_offset(&mut st, -0.218, 0.002725, 1.0), -0.0013625));
        assert!(close(st.d_cl_t_prev, -0.0013625));

        let mut st = BehaviorState { d_cl_t_prev: -0.1, s_prev: 0.0 };
        assert!(close(rate_limit_traffic_offset(&mut st, -0.1, 0.002725, 7.0), -0.1));

        let mut st = BehaviorState { d_cl_t_prev: -0.218, s_prev: 0.0 };
        assert!(close(rate_limit_traffic_offset(&mut st, 0.0, 0.002725, 2.0), -0.215275));
    }

    #[test]
    fn min_selection_examples() {
        let sportive = StyleParams::sportive();
        // left curve with 0.699 m cut, traffic branch already at -0.005
        let mut st = BehaviorState { d_cl_t_prev: -0.005, s_prev: 0.0 };
        let k = 4.0 / (20.0 * 20.0);
        let raw_gap = 80.0 * (1.0 - 0.005 / 0.01);
        let out = target_offset(
            &sportive,
            &BehaviorInput { k, v: 20.0, obs: TrafficObservation::at(raw_gap), s: 0.0, dt: 0.01 },
            &mut st,
            &BehaviorConfig::default(),
        );
        assert!(close(out.d_cl_ccg, 0.699));
        assert!(close(out.d_cl, -0.005));

        let passive = StyleParams::passive();
        let mut st = BehaviorState { d_cl_t_prev: -0.2, s_prev: 0.0 };
        let gap = 80.0 * (1.0 - 0.2 / 0.218);
        let out = target_offset(
            &passive,
            &BehaviorInput { k: -3.0 / 400.0, v: 20.0, obs: TrafficObservation::at(gap), s: 0.0, dt: 0.01 },
            &mut st,
            &BehaviorConfig::default(),
        );
        assert!(close(out.d_cl_ccg, -0.036));
        assert!(close(out.d_cl, -0.2));
    }

    #[test]
    fn no_traffic_straight_and_rail() {
        let mut st = BehaviorState::default();
        for style in [StyleParams::passive(), StyleParams::sportive(), StyleParams::rail()] {
            let out = target_offset(
                &style,
                &BehaviorInput { k: 0.0, v: 22.0, obs: TrafficObservation::none(), s: 1.0, dt: 0.01 },
                &mut st,
                &BehaviorConfig::default(),
            );
            assert_eq!(out.d_cl, 0.0);
        }
        let out = target_offset(
            &StyleParams::rail(),
            &BehaviorInput { k: 0.01, v: 22.0, obs: TrafficObservation::at(3.0), s: 2.0, dt: 0.01 },
            &mut st,
            &BehaviorConfig::default(),
        );
        assert_eq!(out.d_cl, 0.0);
    }

    #[test]
    fn left_cut_survives_without_traffic() {
        let mut st = BehaviorState::default();
        let out = target_offset(
            &StyleParams::sportive(),
            &BehaviorInput { k: 0.01, v: 20.0, obs: TrafficObservation::none(), s: 0.0, dt: 0.01 },
            &mut st,
            &BehaviorConfig::default(),
        );
        assert!(close(out.d_cl, 0.699));
        assert!(!out.traffic_active);
    }

    #[test]
    fn per_meter_basis_uses_distance() {
        let cfg = BehaviorConfig {
            rate_basis: RateLimitBasis::PerMeter,
            ..BehaviorConfig::default()
        };
        assert_eq!(cfg.rate_units(2.5, 0.01), 2.5);
        assert_eq!(BehaviorConfig::default().rate_units(2.5, 0.02), 2.0);
    }
}
