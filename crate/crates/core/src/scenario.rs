//! Scripted encounters and the fixed-step closed-loop simulation.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::behavior::{
    curve_cut_offset, lateral_accel_preview, target_offset, BehaviorInput, BehaviorState, TrafficObservation,
};
use crate::error::{Error, Result};
use crate::pathfollow::{speed_limit_profile, step, SimConfig, SpeedRef, VehicleState};
use crate::road::{generate_track, SegmentKind, TrackModel, TrackSpec};
use crate::styles::{ReplaySample, ReplayTrace, StyleParams};

/// Distance at which an oncoming actor appears ahead of the ego vehicle.
pub const VISIBILITY: f64 = 80.0;
pub const DEFAULT_ACTOR_SPEED: f64 = 19.4;
/// Logged `d_traffic` when nothing is in preview.
pub const NO_TRAFFIC: f64 = -1.0;

/// Margin kept free of encounters at both track ends.
const END_MARGIN: f64 = 300.0;
const MIN_TRIGGER_SPACING: f64 = 300.0;
/// Offset of a trigger into its host segment.
const TRIGGER_INSET: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorKind {
    Truck,
    Car,
}

impl ActorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActorKind::Truck => "truck",
            ActorKind::Car => "car",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Encounter {
    /// Ego arc length at which the actor becomes visible.
    pub trigger_s: f64,
    pub actor_speed: f64,
    pub actor_kind: ActorKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficScript {
    encounters: Vec<Encounter>,
}

impl TrafficScript {
    pub fn new(encounters: Vec<Encounter>) -> Result<Self> {
        for (i, e) in encounters.iter().enumerate() {
            if !(e.trigger_s.is_finite() && e.trigger_s >= 0.0) {
                return Err(Error::validation(format!("encounter {i}: trigger_s must be >= 0")));
            }
            if !(e.actor_speed.is_finite() && e.actor_speed >= 0.0) {
                return Err(Error::validation(format!("encounter {i}: actor_speed must be >= 0")));
            }
        }
        if encounters.windows(2).any(|w| w[1].trigger_s < w[0].trigger_s) {
            return Err(Error::validation("encounters must be sorted by trigger_s"));
        }
        Ok(TrafficScript { encounters })
    }

    pub fn empty() -> Self {
        TrafficScript::default()
    }

    pub fn encounters(&self) -> &[Encounter] {
        &self.encounters
    }

    pub fn check_against(&self, track: &TrackModel) -> Result<()> {
        match self.encounters.last() {
            Some(e) if e.trigger_s > track.total_length() => Err(Error::Range {
                s: e.trigger_s,
                length: track.total_length(),
            }),
            _ => Ok(()),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trigger_s", "actor_speed", "actor_kind"])?;
        for e in &self.encounters {
            w.write_record([e.trigger_s.to_string(), e.actor_speed.to_string(), e.actor_kind.as_str().into()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut encounters = Vec::new();
        for rec in r.deserialize() {
            encounters.push(rec?);
        }
        TrafficScript::new(encounters)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Weather condition of a run. Recorded in the log only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    #[default]
    Dry,
    Rain,
}

impl Weather {
    pub fn as_str(self) -> &'static str {
        match self {
            Weather::Dry => "dry",
            Weather::Rain => "rain",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dry" => Ok(Weather::Dry),
            "rain" => Ok(Weather::Rain),
            other => Err(Error::Lookup {
                kind: "weather",
                name: other.to_string(),
            }),
        }
    }
}

/// What produces the lateral and speed targets.
#[derive(Debug, Clone, Copy)]
pub enum Driver<'a> {
    Style(&'a StyleParams),
    /// Recorded targets, tracked within the given acceleration envelope.
    Replay { trace: &'a ReplayTrace, limits: &'a StyleParams },
}

impl Driver<'_> {
    pub fn tag(&self) -> &str {
        match self {
            Driver::Style(p) => &p.name,
            Driver::Replay { .. } => "replay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub s: f64,
    pub v: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub k: f64,
    pub d_cl_target: f64,
    pub d_cl_actual: f64,
    pub steer: f64,
    pub d_traffic: f64,
    pub weather: Weather,
    pub style: String,
    /// Rate-limited traffic offset; in memory only, not part of the CSV.
    #[serde(skip)]
    pub d_cl_traffic: Option<f64>,
}

pub const LOG_COLUMNS: [&str; 12] = [
    "t",
    "s",
    "v",
    "a_x",
    "a_y",
    "k",
    "d_cl_target",
    "d_cl_actual",
    "steer",
    "d_traffic",
    "weather",
    "style",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<LogRow>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(LOG_COLUMNS)?;
        for r in &self.rows {
            let nums = [r.t, r.s, r.v, r.a_x, r.a_y, r.k, r.d_cl_target, r.d_cl_actual, r.steer, r.d_traffic];
            let mut rec: Vec<String> = nums.iter().map(f64::to_string).collect();
            rec.push(r.weather.as_str().into());
            rec.push(r.style.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != LOG_COLUMNS {
            return Err(Error::validation(format!("unexpected log header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in r.deserialize() {
            rows.push(rec?);
        }
        Ok(SimLog { rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Recorded `(s, d_cl_actual, v)` as a replay trace. Rows that do not
    /// advance `s` are dropped.
    pub fn to_replay_trace(&self) -> Result<ReplayTrace> {
        let mut samples: Vec<ReplaySample> = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            if samples.last().is_some_and(|p| r.s <= p.s) {
                continue;
            }
            samples.push(ReplaySample {
                s: r.s,
                d_cl: r.d_cl_actual,
                v: r.v,
            });
        }
        ReplayTrace::new(samples)
    }

    /// Index ranges `[start, end)` of consecutive rows with traffic in preview.
    pub fn traffic_episodes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, r) in self.rows.iter().enumerate() {
            match (r.d_traffic >= 0.0, start) {
                (true, None) => start = Some(i),
                (false, Some(b)) => {
                    out.push((b, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(b) = start {
            out.push((b, self.rows.len()));
        }
        out
    }
}

/// Curve-cutting offsets keyed by the arc length they were previewed for.
///
/// The behavior model evaluates the curve ahead; the result is the offset
/// wanted once the vehicle gets there, so it is stored at the preview
/// point and read back when the controller reaches it.
#[derive(Default)]
struct PreviewBuffer {
    s: std::collections::VecDeque<f64>,
    d: std::collections::VecDeque<f64>,
}

impl PreviewBuffer {
    /// Covers `[0, v * preview_time]` so the first ticks have a reference.
    fn seeded(track: &TrackModel, style: &StyleParams, v: f64, preview_time: f64) -> Self {
        let mut buf = PreviewBuffer::default();
        let reach = v * preview_time;
        let n = reach.ceil() as usize;
        for i in 0..n {
            let s = i as f64;
            let a_y = lateral_accel_preview(track.curvature_clamped(s), v);
            buf.push(s, curve_cut_offset(style, a_y));
        }
        buf
    }

    fn push(&mut self, s: f64, d: f64) {
        // preview points move backward only when the vehicle slows sharply
        while self.s.back().is_some_and(|&last| last >= s) {
            self.s.pop_back();
            self.d.pop_back();
        }
        self.s.push_back(s);
        self.d.push_back(d);
    }

    fn at(&mut self, s: f64) -> f64 {
        while self.s.len() > 2 && self.s[1] <= s - 50.0 {
            self.s.pop_front();
            self.d.pop_front();
        }
        let n = self.s.len();
        if n == 0 {
            return 0.0;
        }
        if s <= self.s[0] {
            return self.d[0];
        }
        if s >= self.s[n - 1] {
            return self.d[n - 1];
        }
        let i = self.s.partition_point(|&x| x <= s);
        let (s0, s1) = (self.s[i - 1], self.s[i]);
        let f = (s - s0) / (s1 - s0);
        self.d[i - 1] + f * (self.d[i] - self.d[i - 1])
    }
}

struct Actor {
    s: f64,
    speed: f64,
}

/// Simulates one drive from `s = 0` to the end of `track`.
pub fn run(
    track: &TrackModel,
    driver: Driver<'_>,
    script: &TrafficScript,
    cfg: &SimConfig,
    weather: Weather,
) -> Result<SimLog> {
    cfg.validate()?;
    script.check_against(track)?;
    let limits = match driver {
        Driver::Style(p) => p,
        Driver::Replay { limits, .. } => limits,
    };
    limits.validate()?;
    let tag = driver.tag().to_string();
    let length = track.total_length();

    let v0 = match driver {
        Driver::Style(_) => cfg.v0.unwrap_or(cfg.v_target),
        Driver::Replay { trace, .. } => cfg.v0.unwrap_or(trace.at(0.0).1),
    };
    let profile = match driver {
        Driver::Style(p) => Some(speed_limit_profile(track, p, cfg.v_target, v0)),
        Driver::Replay { .. } => None,
    };
    let preview_limit = match driver {
        Driver::Style(p) => p.rho_t,
        Driver::Replay { .. } => VISIBILITY,
    };

    let mut state = VehicleState {
        v: profile.as_ref().map_or(v0, |p| p.at(0.0)),
        ..VehicleState::default()
    };
    let mut behavior = BehaviorState::at(0.0);
    let mut curve_ref = match driver {
        Driver::Style(style) => PreviewBuffer::seeded(track, style, state.v, cfg.behavior.preview_time),
        Driver::Replay { .. } => PreviewBuffer::default(),
    };
    let mut actors: Vec<Actor> = Vec::new();
    let mut pending = script.encounters().iter().peekable();
    let max_ticks = (((length / cfg.v_target) * 10.0 + 600.0) / cfg.dt).ceil() as usize;
    let mut rows = Vec::with_capacity(((length / cfg.v_target) / cfg.dt) as usize + 16);

    let mut tick = 0usize;
    while state.s < length {
        if tick >= max_ticks {
            return Err(Error::NumericAbort {
                row: tick,
                detail: format!("did not reach track end (s = {:.1} of {length:.1})", state.s),
            });
        }
        while let Some(e) = pending.next_if(|e| state.s >= e.trigger_s) {
            actors.push(Actor {
                s: e.trigger_s + VISIBILITY,
                speed: e.actor_speed,
            });
        }
        let gap = actors
            .iter()
            .map(|a| a.s - state.s)
            .filter(|g| (0.0..=preview_limit).contains(g))
            .min_by(f64::total_cmp);
        let obs = gap.map_or(TrafficObservation::none(), TrafficObservation::at);

        let lookahead = cfg.lookahead(state.v);
        let (target_d, target_ahead, speed, d_cl_traffic) = match driver {
            Driver::Style(style) => {
                let preview_s = state.s + state.v * cfg.behavior.preview_time;
                let input = BehaviorInput {
                    k: track.curvature_clamped(preview_s),
                    v: state.v,
                    obs,
                    s: state.s,
                    dt: cfg.dt,
                };
                let prev_t = behavior.d_cl_t_prev;
                let prev_s = behavior.s_prev;
                let out = target_offset(style, &input, &mut behavior, &cfg.behavior);
                curve_ref.push(preview_s, out.d_cl_ccg);

                let ccg_here = curve_ref.at(state.s);
                let ccg_ahead = curve_ref.at(state.s + lookahead);
                let (here, ahead) = if out.traffic_active {
                    // continue the current traffic ramp over the lookahead
                    let ds = state.s - prev_s;
                    let slope = if ds > 0.0 { (out.d_cl_t - prev_t) / ds } else { 0.0 };
                    let t_ahead = (out.d_cl_t + slope * lookahead).clamp(style.d_t0, 0.0);
                    (ccg_here.min(out.d_cl_t), ccg_ahead.min(t_ahead))
                } else {
                    (ccg_here, ccg_ahead)
                };
                let speed = profile.as_ref().expect("style run has a profile").reference(state.s);
                (here, ahead, speed, Some(out.d_cl_t))
            }
            Driver::Replay { trace, .. } => {
                let (d, v) = trace.at(state.s);
                let (d_ahead, _) = trace.at(state.s + lookahead);
                let (_, v_next) = trace.at(state.s + 1.0);
                let speed = SpeedRef {
                    v_lim: v,
                    a_ff: 0.5 * (v_next * v_next - v * v),
                };
                (d, d_ahead, speed, None)
            }
        };

        let (cmd, next) = step(track, &state, target_ahead, speed, cfg, limits);
        let row = LogRow {
            t: tick as f64 * cfg.dt,
            s: state.s,
            v: state.v,
            a_x: cmd.a_x_cmd,
            a_y: next.a_y,
            k: track.curvature_clamped(state.s),
            d_cl_target: target_d,
            d_cl_actual: state.d,
            steer: cmd.steer,
            d_traffic: gap.unwrap_or(NO_TRAFFIC),
            weather,
            style: tag.clone(),
            d_cl_traffic,
        };
        let finite = [next.s, next.d, next.heading_err, next.v, next.a_y, cmd.steer, cmd.a_x_cmd]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NumericAbort {
                row: tick,
                detail: "non-finite vehicle state".into(),
            });
        }
        rows.push(row);
        state = next;
        for a in &mut actors {
            a.s -= a.speed * cfg.dt;
        }
        actors.retain(|a| a.s > state.s - VISIBILITY);
        tick += 1;
    }
    Ok(SimLog { rows })
}

/// The default study layout: the default generated track with four truck
/// encounters, two starting inside left curves and two on straights.
pub fn default_study_scenario(seed: u64) -> Result<(TrackModel, TrafficScript)> {
    let track = generate_track(&TrackSpec {
        seed,
        ..TrackSpec::default()
    })?;
    let script = study_script(&track)?;
    Ok((track, script))
}

/// Places two encounters in the longest left arcs and two on the longest
/// interior straights, keeping clear of the track ends and of each other.
pub fn study_script(track: &TrackModel) -> Result<TrafficScript> {
    let length = track.total_length();
    let segs = track.segments();
    let candidates = |want_left_arc: bool| {
        let mut c: Vec<(f64, f64)> = segs
            .iter()
            .enumerate()
            .filter(|(i, seg)| {
                if want_left_arc {
                    seg.kind == SegmentKind::Arc && seg.curvature_start > 0.0
                } else {
                    seg.kind == SegmentKind::Straight && *i > 0 && *i + 1 < segs.len()
                }
            })
            .map(|(i, seg)| (seg.length, track.segment_start(i) + TRIGGER_INSET))
            .filter(|&(_, s)| s >= END_MARGIN && s <= length - END_MARGIN)
            .collect();
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
        c
    };
    let mut chosen: Vec<f64> = Vec::with_capacity(4);
    for want_left_arc in [true, false] {
        let mut picked = 0;
        for (_, s) in candidates(want_left_arc) {
            if picked == 2 {
                break;
            }
            if chosen.iter().all(|c| (c - s).abs() >= MIN_TRIGGER_SPACING) {
                chosen.push(s);
                picked += 1;
            }
        }
        if picked < 2 {
            return Err(Error::validation(format!(
                "track has too few well-separated {} for the study script",
                if want_left_arc { "left curves" } else { "straights" }
            )));
        }
    }
    chosen.sort_by(f64::total_cmp);
    TrafficScript::new(
        chosen
            .into_iter()
            .map(|trigger_s| Encounter {
                trigger_s,
                actor_speed: DEFAULT_ACTOR_SPEED,
                actor_kind: ActorKind::Truck,
            })
            .collect(),
    )
}
