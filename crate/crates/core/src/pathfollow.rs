//! GG-envelope constrained path following.
//!
//! Speed planning runs three passes over a 1 m grid: a curvature cap, a
//! backward braking pass and a forward acceleration pass. The braking and
//! acceleration budgets shrink with the lateral acceleration already in
//! use (elliptic envelope), so the planned profile is one the controller
//! can actually follow. Steering is pure pursuit toward the laterally
//! offset reference path, expressed relative to the road; the vehicle is a
//! kinematic bicycle integrated in Frenet coordinates.

use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorConfig;
use crate::road::{wrap_angle, TrackModel};
use crate::styles::StyleParams;

/// Grid spacing of the speed profile, meters.
pub const PROFILE_STEP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub s: f64,
    /// Lateral offset of the reference point from the lane center, + left.
    pub d: f64,
    /// Heading relative to the road tangent.
    pub heading_err: f64,
    pub v: f64,
    pub a_x: f64,
    pub a_y: f64,
}

impl VehicleState {
    pub fn at_rest_on_center(v: f64) -> Self {
        VehicleState {
            v,
            ..VehicleState::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    /// Steering-wheel angle, rad.
    pub steer: f64,
    pub a_x_cmd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub v_target: f64,
    /// Initial speed; `None` starts at the planned speed.
    pub v0: Option<f64>,
    pub wheelbase: f64,
    pub steer_ratio: f64,
    /// Steering-wheel angle limit, rad.
    pub steer_max: f64,
    /// Lookahead time, s.
    pub lookahead_gain: f64,
    pub lookahead_bounds: (f64, f64),
    /// Proportional speed gain, 1/s.
    pub speed_gain: f64,
    pub behavior: BehaviorConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            v_target: 22.2,
            v0: None,
            wheelbase: 2.62,
            steer_ratio: 14.0,
            steer_max: 8.0,
            lookahead_gain: 0.8,
            lookahead_bounds: (5.0, 40.0),
            speed_gain: 1.0,
            behavior: BehaviorConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("dt must be > 0"));
        }
        if !(self.v_target.is_finite() && self.v_target > 0.0) {
            return Err(Error::validation("v_target must be > 0"));
        }
        if let Some(v0) = self.v0 {
            if !(v0.is_finite() && v0 >= 0.0) {
                return Err(Error::validation("v0 must be >= 0"));
            }
        }
        let (lo, hi) = self.lookahead_bounds;
        if !(self.wheelbase > 0.0
            && self.steer_ratio > 0.0
            && self.steer_max > 0.0
            && self.lookahead_gain > 0.0
            && lo > 0.0
            && hi >= lo)
        {
            return Err(Error::validation("vehicle/controller parameters must be positive"));
        }
        if let crate::behavior::RateLimitBasis::PerTick { tick } = self.behavior.rate_basis {
            if !(tick > 0.0) {
                return Err(Error::validation("rate-limit tick must be > 0"));
            }
        }
        Ok(())
    }

    pub fn lookahead(&self, v: f64) -> f64 {
        (self.lookahead_gain * v).clamp(self.lookahead_bounds.0, self.lookahead_bounds.1)
    }
}

/// Fraction of longitudinal authority left at lateral acceleration `a_y`.
pub fn longitudinal_authority(a_y: f64, ay_max: f64) -> f64 {
    let r = a_y / ay_max;
    (1.0 - r * r).max(0.0).sqrt()
}

/// Speed limit on a uniform arc-length grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    step: f64,
    v: Vec<f64>,
}

/// Speed reference handed to the controller at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedRef {
    pub v_lim: f64,
    /// Feedforward acceleration along the profile, `d(v^2)/ds / 2`.
    pub a_ff: f64,
}

impl SpeedProfile {
    pub fn from_samples(step: f64, v: Vec<f64>) -> Self {
        SpeedProfile { step, v }
    }

    pub fn samples(&self) -> &[f64] {
        &self.v
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn at(&self, s: f64) -> f64 {
        self.reference(s).v_lim
    }

    pub fn reference(&self, s: f64) -> SpeedRef {
        let n = self.v.len();
        if n == 1 {
            return SpeedRef { v_lim: self.v[0], a_ff: 0.0 };
        }
        let x = (s / self.step).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        let (a, b) = (self.v[i], self.v[i + 1]);
        SpeedRef {
            v_lim: a + f * (b - a),
            a_ff: (b * b - a * a) / (2.0 * self.step),
        }
    }
}

/// Plans the envelope-limited speed profile of `style` along `track`.
pub fn speed_limit_profile(track: &TrackModel, style: &StyleParams, v_target: f64, v0: f64) -> SpeedProfile {
    let len = track.total_length();
    let n = (len / PROFILE_STEP).ceil() as usize + 1;
    let s_at = |i: usize| (i as f64 * PROFILE_STEP).min(len);
    let k: Vec<f64> = (0..n).map(|i| track.curvature_clamped(s_at(i))).collect();

    // curvature cap
    let mut v: Vec<f64> = k
        .iter()
        .map(|&ki| {
            if ki == 0.0 {
                v_target
            } else {
                (style.ay_max / ki.abs()).sqrt().min(v_target)
            }
        })
        .collect();

    // backward: braking budget shrinks with the lateral load at the faster end
    let brake = style.ax_min.abs();
    for i in (0..n - 1).rev() {
        let ds = s_at(i + 1) - s_at(i);
        let k_seg = k[i].abs().max(k[i + 1].abs());
        let reachable = coupled_reach(v[i + 1], brake, k_seg, style.ay_max, ds);
        v[i] = v[i].min(reachable);
    }

    // forward from the initial speed
    v[0] = v[0].min(v0.max(0.0));
    for i in 0..n - 1 {
        let ds = s_at(i + 1) - s_at(i);
        let k_seg = k[i].abs().max(k[i + 1].abs());
        let reachable = coupled_reach(v[i], style.ax_max, k_seg, style.ay_max, ds);
        v[i + 1] = v[i + 1].min(reachable);
    }
    SpeedProfile { step: PROFILE_STEP, v }
}

/// Largest `u >= v` with `u^2 = v^2 + 2 * a * auth(k u^2) * ds`, the speed
/// reachable over `ds` when the longitudinal budget is evaluated at the
/// faster end of the step.
fn coupled_reach(v: f64, a: f64, k: f64, ay_max: f64, ds: f64) -> f64 {
    let excess = |u: f64| u * u - v * v - 2.0 * a * longitudinal_authority(k * u * u, ay_max) * ds;
    let mut lo = v;
    let mut hi = (v * v + 2.0 * a * ds).sqrt();
    if excess(hi) <= 0.0 {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// One control and integration step.
///
/// `target_ahead` is the reference lateral offset at the lookahead point
/// `s + L`. Steering is pure pursuit in road-aligned coordinates on top of
/// a feedforward of the road curvature, so a constant reference is held
/// without corner cutting.
pub fn step(
    track: &TrackModel,
    state: &VehicleState,
    target_ahead: f64,
    speed: SpeedRef,
    cfg: &SimConfig,
    limits: &StyleParams,
) -> (ControlCommand, VehicleState) {
    let v = state.v.max(0.0);
    let lookahead = cfg.lookahead(v);

    let k_road = track.curvature_clamped(state.s);
    let feedforward = k_road / (1.0 - k_road * state.d).max(1e-3);
    let alpha = wrap_angle((target_ahead - state.d).atan2(lookahead) - state.heading_err);
    let chord = lookahead.hypot(target_ahead - state.d);
    let curvature_cmd = feedforward + 2.0 * alpha.sin() / chord;

    let wheel = (cfg.wheelbase * curvature_cmd).atan();
    let steer = (wheel * cfg.steer_ratio).clamp(-cfg.steer_max, cfg.steer_max);
    let path_curvature = (steer / cfg.steer_ratio).tan() / cfg.wheelbase;
    let a_y = v * v * path_curvature;

    let desired = speed.a_ff + cfg.speed_gain * (speed.v_lim - v);
    let auth = longitudinal_authority(a_y, limits.ay_max);
    let a_x_cmd = desired.clamp(limits.ax_min * auth, limits.ax_max * auth);

    let next = integrate(track, state, path_curvature, a_x_cmd, cfg.dt);
    let next = VehicleState {
        a_x: if next.v > 0.0 || v > 0.0 { (next.v - v) / cfg.dt } else { 0.0 },
        a_y,
        ..next
    };
    (ControlCommand { steer, a_x_cmd }, next)
}

/// Midpoint integration of the Frenet kinematic bicycle.
fn integrate(track: &TrackModel, st: &VehicleState, curvature: f64, a_x: f64, dt: f64) -> VehicleState {
    let deriv = |s: f64, d: f64, psi: f64, v: f64| {
        let k = track.curvature_clamped(s);
        let denom = (1.0 - k * d).max(1e-3);
        let s_dot = v * psi.cos() / denom;
        let d_dot = v * psi.sin();
        let psi_dot = v * curvature - k * s_dot;
        (s_dot, d_dot, psi_dot)
    };
    let v0 = st.v.max(0.0);
    let v1 = (v0 + a_x * dt).max(0.0);
    let vm = 0.5 * (v0 + v1);
    let (s1, d1, p1) = deriv(st.s, st.d, st.heading_err, v0);
    let h = 0.5 * dt;
    let (s2, d2, p2) = deriv(st.s + h * s1, st.d + h * d1, st.heading_err + h * p1, vm);
    VehicleState {
        s: st.s + dt * s2,
        d: st.d + dt * d2,
        heading_err: wrap_angle(st.heading_err + dt * p2),
        v: v1,
        ..*st
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road::TrackSegment;

    fn straight(len: f64) -> TrackModel {
        TrackModel::new(vec![TrackSegment::straight(len)], 3.0).unwrap()
    }

    #[test]
    fn curvature_cap_on_arc() {
        let t = TrackModel::new(vec![TrackSegment::arc(500.0, 0.02)], 3.0).unwrap();
        let p = speed_limit_profile(&t, &StyleParams::rail(), 22.2, 0.0);
        let cap = (4.731f64 / 0.02).sqrt();
        assert!((p.at(250.0) - cap).abs() < 1e-9);
        assert!((cap - 15.38).abs() < 0.01);
    }

    #[test]
    fn style_cap_ratio() {
        let t = TrackModel::new(vec![TrackSegment::arc(500.0, 0.02)], 3.0).unwrap();
        let sp = speed_limit_profile(&t, &StyleParams::sportive(), 40.0, 40.0).at(250.0);
        let pa = speed_limit_profile(&t, &StyleParams::passive(), 40.0, 40.0).at(250.0);
        assert!((sp / pa - (5.653f64 / 3.90).sqrt()).abs() < 1e-9);
        assert!((sp / pa - 1.204).abs() < 1e-3);
    }

    #[test]
    fn straight_profile_ramps_then_holds() {
        let t = straight(1000.0);
        let p = speed_limit_profile(&t, &StyleParams::passive(), 22.2, 5.0);
        assert_eq!(p.samples()[0], 5.0);
        // forward pass oracle: v^2 = v0^2 + 2 a s until v_target
        let ramp = (22.2f64 * 22.2 - 25.0) / (2.0 * 2.108);
        assert!((p.at(50.0) - (25.0 + 2.0 * 2.108 * 50.0f64).sqrt()).abs() < 1e-9);
        for s in [ramp + 1.0, 500.0, 1000.0] {
            assert_eq!(p.at(s), 22.2);
        }
    }

    #[test]
    fn braking_pass_respects_deceleration() {
        let t = TrackModel::new(
            vec![TrackSegment::straight(300.0), TrackSegment::arc(100.0, 0.02)],
            3.0,
        )
        .unwrap();
        let style = StyleParams::passive();
        let p = speed_limit_profile(&t, &style, 22.2, 22.2);
        for w in p.samples().windows(2) {
            assert!(w[0] * w[0] <= w[1] * w[1] + 2.0 * style.ax_min.abs() * PROFILE_STEP + 1e-9);
            assert!(w[1] * w[1] <= w[0] * w[0] + 2.0 * style.ax_max * PROFILE_STEP + 1e-9);
        }
    }

    #[test]
    fn equilibrium_on_straight() {
        let t = straight(500.0);
        let cfg = SimConfig::default();
        let st = VehicleState {
            s: 100.0,
            v: 22.2,
            ..VehicleState::default()
        };
        let (cmd, next) = step(&t, &st, 0.0, SpeedRef { v_lim: 22.2, a_ff: 0.0 }, &cfg, &StyleParams::rail());
        assert!(cmd.steer.abs() < 1e-9);
        assert!(cmd.a_x_cmd.abs() < 1e-9);
        assert!(next.d.abs() < 1e-9);
        assert!((next.s - (100.0 + 22.2 * 0.01)).abs() < 1e-9);
    }

    #[test]
    fn no_longitudinal_authority_at_lateral_limit() {
        let style = StyleParams::rail();
        assert_eq!(longitudinal_authority(style.ay_max, style.ay_max), 0.0);
        assert_eq!(longitudinal_authority(-style.ay_max, style.ay_max), 0.0);
        assert_eq!(longitudinal_authority(0.0, style.ay_max), 1.0);
        assert_eq!(longitudinal_authority(2.0 * style.ay_max, style.ay_max), 0.0);
    }

    #[test]
    fn step_is_deterministic() {
        let t = TrackModel::new(vec![TrackSegment::arc(300.0, 0.005)], 3.0).unwrap();
        let cfg = SimConfig::default();
        let st = VehicleState {
            s: 10.0,
            d: 0.1,
            heading_err: 0.01,
            v: 18.0,
            ..VehicleState::default()
        };
        let r = SpeedRef { v_lim: 20.0, a_ff: 0.1 };
        let a = step(&t, &st, -0.2, r, &cfg, &StyleParams::sportive());
        let b = step(&t, &st, -0.2, r, &cfg, &StyleParams::sportive());
        assert_eq!(a, b);
    }

    #[test]
    fn commanded_accel_within_envelope() {
        let t = straight(500.0);
        let cfg = SimConfig::default();
        let style = StyleParams::passive();
        for (v, v_lim) in [(0.0, 30.0), (30.0, 0.0), (10.0, 10.5)] {
            let st = VehicleState { s: 1.0, v, ..VehicleState::default() };
            let (cmd, next) = step(&t, &st, 0.0, SpeedRef { v_lim, a_ff: 0.0 }, &cfg, &style);
            assert!(cmd.a_x_cmd >= style.ax_min && cmd.a_x_cmd <= style.ax_max);
            assert!(next.v >= 0.0);
        }
    }
}
