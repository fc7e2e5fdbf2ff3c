//! Arc-length parameterized road model.
//!
//! A track is an ordered list of straights, constant-curvature arcs and
//! clothoids (curvature linear in arc length). Curvature is signed with
//! positive values for left curves. Lateral offsets follow the same
//! convention: `d > 0` displaces to the left of the travel direction.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lane width of a two-lane rural road.
pub const DEFAULT_LANE_WIDTH: f64 = 3.0;
/// Length of the clothoid transitions inserted around every arc.
pub const TRANSITION_LENGTH: f64 = 30.0;

const MIN_STRAIGHT: f64 = 20.0;
const MIN_ARC: f64 = 10.0;
/// Share of the track length the generator nominally allots to curves.
const CURVE_SHARE: f64 = 0.5;
/// Sub-interval length for clothoid position quadrature.
const QUADRATURE_STEP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Straight,
    Arc,
    Clothoid,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Straight => "straight",
            SegmentKind::Arc => "arc",
            SegmentKind::Clothoid => "clothoid",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "straight" => Ok(SegmentKind::Straight),
            "arc" => Ok(SegmentKind::Arc),
            "clothoid" => Ok(SegmentKind::Clothoid),
            other => Err(Error::Lookup {
                kind: "segment kind",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSegment {
    pub kind: SegmentKind,
    pub length: f64,
    #[serde(rename = "k_start")]
    pub curvature_start: f64,
    #[serde(rename = "k_end")]
    pub curvature_end: f64,
}

impl TrackSegment {
    pub fn straight(length: f64) -> Self {
        TrackSegment {
            kind: SegmentKind::Straight,
            length,
            curvature_start: 0.0,
            curvature_end: 0.0,
        }
    }

    pub fn arc(length: f64, curvature: f64) -> Self {
        TrackSegment {
            kind: SegmentKind::Arc,
            length,
            curvature_start: curvature,
            curvature_end: curvature,
        }
    }

    pub fn clothoid(length: f64, curvature_start: f64, curvature_end: f64) -> Self {
        TrackSegment {
            kind: SegmentKind::Clothoid,
            length,
            curvature_start,
            curvature_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::validation(format!(
                "segment length must be positive, got {}",
                self.length
            )));
        }
        if !(self.curvature_start.is_finite() && self.curvature_end.is_finite()) {
            return Err(Error::validation("segment curvature must be finite"));
        }
        match self.kind {
            SegmentKind::Straight if self.curvature_start != 0.0 || self.curvature_end != 0.0 => {
                Err(Error::validation("straight segment with nonzero curvature"))
            }
            SegmentKind::Arc if self.curvature_start != self.curvature_end => Err(
                Error::validation("arc segment with differing start/end curvature"),
            ),
            SegmentKind::Arc if self.curvature_start == 0.0 => {
                Err(Error::validation("arc segment with zero curvature"))
            }
            _ => Ok(()),
        }
    }

    /// Curvature at local arc length `u` in `[0, length]`.
    pub fn curvature_at(&self, u: f64) -> f64 {
        match self.kind {
            SegmentKind::Straight => 0.0,
            SegmentKind::Arc => self.curvature_start,
            SegmentKind::Clothoid => {
                self.curvature_start
                    + (self.curvature_end - self.curvature_start) * (u / self.length)
            }
        }
    }

    fn curvature_rate(&self) -> f64 {
        (self.curvature_end - self.curvature_start) / self.length
    }

    /// Heading change accumulated over the first `u` meters.
    fn heading_change(&self, u: f64) -> f64 {
        match self.kind {
            SegmentKind::Straight => 0.0,
            SegmentKind::Arc => self.curvature_start * u,
            SegmentKind::Clothoid => {
                self.curvature_start * u + 0.5 * self.curvature_rate() * u * u
            }
        }
    }

    /// Centerline displacement after `u` meters from a start heading.
    fn displacement(&self, heading: f64, u: f64) -> (f64, f64) {
        match self.kind {
            SegmentKind::Straight => (u * heading.cos(), u * heading.sin()),
            SegmentKind::Arc => arc_displacement(heading, self.curvature_start, u),
            SegmentKind::Clothoid => {
                let rate = self.curvature_rate();
                if rate == 0.0 {
                    return arc_displacement(heading, self.curvature_start, u);
                }
                let k0 = self.curvature_start;
                let theta = |t: f64| heading + k0 * t + 0.5 * rate * t * t;
                gauss_legendre(u, |t| {
                    let th = theta(t);
                    (th.cos(), th.sin())
                })
            }
        }
    }
}

fn arc_displacement(heading: f64, k: f64, u: f64) -> (f64, f64) {
    if k == 0.0 {
        return (u * heading.cos(), u * heading.sin());
    }
    // chord form, stable for small k*u
    let half = 0.5 * k * u;
    let chord = if half.abs() < 1e-12 { u } else { 2.0 * half.sin() / k };
    let mid = heading + half;
    (chord * mid.cos(), chord * mid.sin())
}

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Composite 5-point Gauss-Legendre quadrature of a planar vector field.
fn gauss_legendre(u: f64, f: impl Fn(f64) -> (f64, f64)) -> (f64, f64) {
    if u == 0.0 {
        return (0.0, 0.0);
    }
    let n = (u.abs() / QUADRATURE_STEP).ceil().max(1.0) as usize;
    let h = u / n as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in 0..n {
        let a = i as f64 * h;
        let mid = a + 0.5 * h;
        for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let (cx, cy) = f(mid + 0.5 * h * node);
            sx += w * cx;
            sy += w * cy;
        }
    }
    (0.5 * h * sx, 0.5 * h * sy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Road centerline with lane geometry. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackModel {
    segments: Vec<TrackSegment>,
    lane_width: f64,
    total_length: f64,
    starts: Vec<f64>,
    start_poses: Vec<Pose>,
}

impl TrackModel {
    pub fn new(segments: Vec<TrackSegment>, lane_width: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::validation("track needs at least one segment"));
        }
        if !(lane_width.is_finite() && lane_width > 0.0) {
            return Err(Error::validation(format!(
                "lane width must be positive, got {lane_width}"
            )));
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut start_poses = Vec::with_capacity(segments.len());
        let mut s = 0.0;
        let mut pose = Pose {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        };
        for (i, seg) in segments.iter().enumerate() {
            seg.validate()
                .map_err(|e| Error::validation(format!("segment {i}: {e}")))?;
            starts.push(s);
            start_poses.push(pose);
            let (dx, dy) = seg.displacement(pose.heading, seg.length);
            pose = Pose {
                x: pose.x + dx,
                y: pose.y + dy,
                heading: pose.heading + seg.heading_change(seg.length),
            };
            s += seg.length;
        }
        Ok(TrackModel {
            segments,
            lane_width,
            total_length: s,
            starts,
            start_poses,
        })
    }

    pub fn segments(&self) -> &[TrackSegment] {
        &self.segments
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Arc length at which segment `index` begins.
    pub fn segment_start(&self, index: usize) -> f64 {
        self.starts[index]
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if s.is_nan() || s < 0.0 || s > self.total_length {
            return Err(Error::Range {
                s,
                length: self.total_length,
            });
        }
        Ok(())
    }

    /// Index of the segment containing `s` (clamped) and the local offset.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.total_length);
        let idx = self
            .starts
            .partition_point(|&start| start <= s)
            .saturating_sub(1);
        let u = (s - self.starts[idx]).min(self.segments[idx].length);
        (idx, u)
    }

    /// Signed curvature `K(s)`, positive in left curves.
    pub fn curvature_at(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        Ok(self.curvature_clamped(s))
    }

    /// Curvature with `s` clamped into the track; zero past either end.
    pub fn curvature_clamped(&self, s: f64) -> f64 {
        if s < 0.0 || s > self.total_length {
            return 0.0;
        }
        let (idx, u) = self.locate(s);
        self.segments[idx].curvature_at(u)
    }

    /// Frenet-to-Cartesian conversion at arc length `s` and lateral offset `d`.
    pub fn pose_at(&self, s: f64, d: f64) -> Result<Pose> {
        self.check_range(s)?;
        Ok(self.pose_extended(s, d))
    }

    /// As [`pose_at`](Self::pose_at) but continues tangentially past the ends.
    pub fn pose_extended(&self, s: f64, d: f64) -> Pose {
        let (center, heading) = if s < 0.0 {
            let p0 = self.start_poses[0];
            ((p0.x + s * p0.heading.cos(), p0.y + s * p0.heading.sin()), p0.heading)
        } else if s > self.total_length {
            let end = self.centerline(self.total_length);
            let extra = s - self.total_length;
            (
                (
                    end.x + extra * end.heading.cos(),
                    end.y + extra * end.heading.sin(),
                ),
                end.heading,
            )
        } else {
            let c = self.centerline(s);
            ((c.x, c.y), c.heading)
        };
        Pose {
            x: center.0 - d * heading.sin(),
            y: center.1 + d * heading.cos(),
            heading,
        }
    }

    fn centerline(&self, s: f64) -> Pose {
        let (idx, u) = self.locate(s);
        let seg = &self.segments[idx];
        let p0 = self.start_poses[idx];
        let (dx, dy) = seg.displacement(p0.heading, u);
        Pose {
            x: p0.x + dx,
            y: p0.y + dy,
            heading: p0.heading + seg.heading_change(u),
        }
    }

    /// Projects a Cartesian point onto the centerline near `s_hint`,
    /// returning `(s, d)`.
    pub fn project(&self, x: f64, y: f64, s_hint: f64) -> (f64, f64) {
        let mut s = s_hint.clamp(0.0, self.total_length);
        let mut lateral = 0.0;
        for _ in 0..100 {
            let c = self.centerline(s);
            let (ex, ey) = (x - c.x, y - c.y);
            let (tx, ty) = (c.heading.cos(), c.heading.sin());
            let along = ex * tx + ey * ty;
            lateral = -ex * ty + ey * tx;
            let k = self.curvature_clamped(s);
            let scale = 1.0 - k * lateral;
            let step = if scale.abs() > 1e-6 { along / scale } else { along };
            let next = (s + step).clamp(0.0, self.total_length);
            if (next - s).abs() < 1e-12 {
                s = next;
                break;
            }
            s = next;
        }
        (s, lateral)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "length", "k_start", "k_end"])?;
        for seg in &self.segments {
            w.write_record([
                seg.kind.as_str().to_string(),
                seg.length.to_string(),
                seg.curvature_start.to_string(),
                seg.curvature_end.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, lane_width: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["kind", "length", "k_start", "k_end"] {
            return Err(Error::validation(format!(
                "track header must be kind,length,k_start,k_end, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut segments = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<f64> {
                rec[j].trim().parse::<f64>().map_err(|_| {
                    Error::validation(format!("track row {}: bad number '{}'", i + 1, &rec[j]))
                })
            };
            segments.push(TrackSegment {
                kind: SegmentKind::parse(&rec[0])?,
                length: num(1)?,
                curvature_start: num(2)?,
                curvature_end: num(3)?,
            });
        }
        TrackModel::new(segments, lane_width)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>, lane_width: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, lane_width)
    }
}

/// Parameters of the synthetic rural-track generator.
///
/// The radius distribution of the real study track is not published; the
/// defaults (5 km, 30 curves, radii uniform in 80–400 m) are a plausible
/// stand-in, not a reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSpec {
    pub length_m: f64,
    pub n_curves: usize,
    pub radius_range: (f64, f64),
    pub seed: u64,
    pub lane_width: f64,
}

impl Default for TrackSpec {
    fn default() -> Self {
        TrackSpec {
            length_m: 5000.0,
            n_curves: 30,
            radius_range: (80.0, 400.0),
            seed: 1,
            lane_width: DEFAULT_LANE_WIDTH,
        }
    }
}

/// Builds a deterministic track alternating straights and curves. Each
/// curve is clothoid-in, arc, clothoid-out; left/right directions are a
/// seeded shuffle with equal counts (one extra either way for odd counts).
pub fn generate_track(spec: &TrackSpec) -> Result<TrackModel> {
    let (r_min, r_max) = spec.radius_range;
    if !(spec.length_m.is_finite() && spec.length_m > 0.0) {
        return Err(Error::validation("track length must be positive"));
    }
    if spec.n_curves == 0 {
        return TrackModel::new(vec![TrackSegment::straight(spec.length_m)], spec.lane_width);
    }
    if !(r_min.is_finite() && r_max.is_finite() && r_min > 0.0 && r_max >= r_min) {
        return Err(Error::validation(format!(
            "radius range must satisfy 0 < min <= max, got [{r_min}, {r_max}]"
        )));
    }
    let n = spec.n_curves;
    let nf = n as f64;
    let per_curve_fixed = 2.0 * TRANSITION_LENGTH;
    let needed = nf * (per_curve_fixed + MIN_ARC) + (nf + 1.0) * MIN_STRAIGHT;
    if needed > spec.length_m {
        return Err(Error::validation(format!(
            "{n} curves need at least {needed} m but track length is {} m",
            spec.length_m
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut lefts = n / 2;
    if n % 2 == 1 && rng.random_bool(0.5) {
        lefts += 1;
    }
    let mut directions: Vec<f64> = (0..n).map(|i| if i < lefts { 1.0 } else { -1.0 }).collect();
    directions.shuffle(&mut rng);

    let radii: Vec<f64> = (0..n)
        .map(|_| if r_max > r_min { rng.random_range(r_min..=r_max) } else { r_min })
        .collect();

    let nominal_arc = (CURVE_SHARE * spec.length_m / nf - per_curve_fixed).max(MIN_ARC);
    let mut arcs: Vec<f64> = (0..n)
        .map(|_| (nominal_arc * rng.random_range(0.5..1.5)).max(MIN_ARC))
        .collect();

    let available_for_arcs = spec.length_m - nf * per_curve_fixed - (nf + 1.0) * MIN_STRAIGHT;
    let arc_total: f64 = arcs.iter().sum();
    if arc_total > available_for_arcs {
        let excess_now = arc_total - nf * MIN_ARC;
        let excess_allowed = available_for_arcs - nf * MIN_ARC;
        let f = if excess_now > 0.0 { excess_allowed / excess_now } else { 0.0 };
        for a in &mut arcs {
            *a = MIN_ARC + (*a - MIN_ARC) * f;
        }
    }
    let arc_total: f64 = arcs.iter().sum();
    let straight_pool = spec.length_m - nf * per_curve_fixed - arc_total;
    let spare = (straight_pool - (nf + 1.0) * MIN_STRAIGHT).max(0.0);
    let weights: Vec<f64> = (0..=n).map(|_| rng.random_range(0.2..1.0)).collect();
    let weight_sum: f64 = weights.iter().sum();
    let straights: Vec<f64> = weights
        .iter()
        .map(|w| MIN_STRAIGHT + spare * w / weight_sum)
        .collect();

    let mut segments = Vec::with_capacity(4 * n + 1);
    for i in 0..n {
        segments.push(TrackSegment::straight(straights[i]));
        let k = directions[i] / radii[i];
        segments.push(TrackSegment::clothoid(TRANSITION_LENGTH, 0.0, k));
        segments.push(TrackSegment::arc(arcs[i], k));
        segments.push(TrackSegment::clothoid(TRANSITION_LENGTH, k, 0.0));
    }
    segments.push(TrackSegment::straight(straights[n]));
    TrackModel::new(segments, spec.lane_width)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clothoid_track() -> TrackModel {
        TrackModel::new(
            vec![
                TrackSegment::straight(20.0),
                TrackSegment::clothoid(50.0, 0.0, 0.01),
                TrackSegment::arc(40.0, 0.01),
            ],
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn straight_has_zero_curvature() {
        let t = TrackModel::new(vec![TrackSegment::straight(100.0)], 3.0).unwrap();
        assert_eq!(t.curvature_at(37.5).unwrap(), 0.0);
    }

    #[test]
    fn arc_curvature_is_inverse_radius() {
        let t = TrackModel::new(vec![TrackSegment::arc(100.0, 1.0 / 100.0)], 3.0).unwrap();
        assert_eq!(t.curvature_at(50.0).unwrap(), 0.01);
    }

    #[test]
    fn clothoid_curvature_interpolates_linearly() {
        let t = clothoid_track();
        // linear interpolation oracle: k0 + (k1 - k0) * 25 / 50
        let expected = 0.0 + (0.01 - 0.0) * 25.0 / 50.0;
        assert!((t.curvature_at(20.0 + 25.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.005).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = clothoid_track();
        assert!(matches!(t.curvature_at(-0.1), Err(Error::Range { .. })));
        assert!(matches!(t.curvature_at(110.1), Err(Error::Range { .. })));
        assert!(t.pose_at(200.0, 0.0).is_err());
        assert!(t.curvature_at(110.0).is_ok());
    }

    #[test]
    fn straight_pose_and_left_offset() {
        let t = TrackModel::new(vec![TrackSegment::straight(100.0)], 3.0).unwrap();
        let p = t.pose_at(10.0, 0.0).unwrap();
        assert_eq!((p.x, p.y, p.heading), (10.0, 0.0, 0.0));
        let p = t.pose_at(10.0, 0.5).unwrap();
        assert_eq!((p.x, p.y, p.heading), (10.0, 0.5, 0.0));
    }

    #[test]
    fn circle_pose_matches_closed_form() {
        let r = 100.0;
        let t = TrackModel::new(vec![TrackSegment::arc(2.0 * PI * r * 0.75, 1.0 / r)], 3.0).unwrap();
        // closed-form circle: center (0, r), position (r sin(s/r), r (1 - cos(s/r)))
        let oracle = |s: f64| (r * (s / r).sin(), r * (1.0 - (s / r).cos()), s / r);
        for s in [PI * 50.0, PI * 100.0, 12.3, 400.0] {
            let p = t.pose_at(s, 0.0).unwrap();
            let (x, y, h) = oracle(s);
            assert!((p.x - x).abs() < 1e-9, "x at {s}: {} vs {x}", p.x);
            assert!((p.y - y).abs() < 1e-9, "y at {s}: {} vs {y}", p.y);
            assert!((p.heading - h).abs() < 1e-12);
        }
        let half = t.pose_at(PI * 100.0, 0.0).unwrap();
        assert!((half.x - 0.0).abs() < 1e-9 && (half.y - 200.0).abs() < 1e-9);
        assert!((half.heading - PI).abs() < 1e-12);
    }

    #[test]
    fn clothoid_pose_matches_fine_euler_integration() {
        let t = clothoid_track();
        // independent oracle: forward Euler at 1 mm on the heading ODE
        let h = 1e-3;
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        let steps = (95.0 / h) as usize;
        for i in 0..steps {
            let s = i as f64 * h;
            let k = t.curvature_clamped(s + 0.5 * h);
            let thm = th + 0.5 * k * h;
            x += h * thm.cos();
            y += h * thm.sin();
            th += k * h;
        }
        let p = t.pose_at(95.0, 0.0).unwrap();
        assert!((p.x - x).abs() < 1e-6, "{} vs {x}", p.x);
        assert!((p.y - y).abs() < 1e-6, "{} vs {y}", p.y);
        assert!((p.heading - th).abs() < 1e-9);
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let spec = TrackSpec {
            length_m: 500.0,
            n_curves: 30,
            ..TrackSpec::default()
        };
        assert!(matches!(generate_track(&spec), Err(Error::Validation(_))));
        let spec = TrackSpec {
            radius_range: (0.0, 10.0),
            ..TrackSpec::default()
        };
        assert!(generate_track(&spec).is_err());
    }

    #[test]
    fn zero_curves_is_single_straight() {
        let spec = TrackSpec {
            length_m: 1000.0,
            n_curves: 0,
            ..TrackSpec::default()
        };
        let t = generate_track(&spec).unwrap();
        assert_eq!(t.segments(), &[TrackSegment::straight(1000.0)]);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-3.5 * PI) - 0.5 * PI).abs() < 1e-12);
        assert_eq!(wrap_angle(0.25), 0.25);
    }
}
