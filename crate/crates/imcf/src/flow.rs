//! Exact weak inverse mean curvature flow of centered spheres.
//!
//! In the radial class the flow is integrable: between jumps the area obeys
//! B(t) = B(0) e^t exactly, so the flow position is the inverse of the area
//! profile restricted to the set where centered balls are minimizing hulls.
//! That set is computed once from the nonincreasing-from-the-right envelope
//! of the area profile; a gap in it is a jump of the weak flow, landing at
//! the next local minimum of the area with equal area on both ends.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::RadialMetric;
use crate::quad::bisect;

/// One sampled flow state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSample {
    /// flow time (t = 0 at the start sphere)
    pub t: f64,
    /// radial coordinate of the flow sphere
    pub s: f64,
    /// sphere area
    pub area: f64,
    /// Hawking mass
    pub hawking_mass: f64,
    /// enclosed volume relative to the start sphere
    pub volume: f64,
    /// mean curvature
    pub mean_curvature: f64,
}

/// A jump of the weak flow to the strictly minimizing hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub t1: f64,
    pub s_before: f64,
    pub s_after: f64,
    pub v_before: f64,
    pub v_after: f64,
}

/// Maximal coordinate intervals on which centered balls are minimizing
/// hulls; the area is nondecreasing on each interval and continuous across
/// the gaps between consecutive intervals.
#[derive(Debug, Clone)]
struct FlowRoute {
    segments: Vec<(f64, f64)>,
}

/// Sampled history of the weak flow started at `start`.
#[derive(Debug, Clone)]
pub struct FlowProfile {
    pub metric: RadialMetric,
    pub start: f64,
    pub samples: Vec<FlowSample>,
    pub jumps: Vec<JumpEvent>,
    /// true when t_max ran past the metric domain and the profile stops early
    pub truncated: bool,
    route: FlowRoute,
    /// absolute enclosed volume of the start sphere (from the metric base)
    base_volume: f64,
    /// area of the first minimizing sphere (after a possible start jump)
    initial_area: f64,
}

fn area_of(metric: &RadialMetric, s: f64) -> f64 {
    metric.area(s)
}

/// Scan grid for the route construction: geometric when the coordinate range
/// spans many decades, uniform otherwise.
fn route_grid(s_lo: f64, s_hi: f64, n: usize) -> Vec<f64> {
    let geometric = s_lo > 0.0 && s_hi / s_lo > 100.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if geometric {
                s_lo * (s_hi / s_lo).powf(t)
            } else {
                s_lo + (s_hi - s_lo) * t
            }
        })
        .collect()
}

fn build_route(metric: &RadialMetric, s0: f64) -> Result<FlowRoute> {
    let (_, hi) = metric.domain();
    let grid = route_grid(s0, hi, 4097);
    let areas: Vec<f64> = grid.iter().map(|&s| area_of(metric, s)).collect();

    // envelope from the right and minimizing flags
    let n = grid.len();
    let mut env = vec![0.0; n];
    env[n - 1] = areas[n - 1];
    for i in (0..n - 1).rev() {
        env[i] = areas[i].min(env[i + 1]);
    }
    let scale = areas.iter().cloned().fold(0.0f64, f64::max);
    let tol = 1e-12 * scale;
    let minimizing: Vec<bool> = (0..n).map(|i| areas[i] <= env[i] + tol).collect();

    if !minimizing[n - 1] || areas[n - 1] < scale - tol {
        return Err(Error::UnboundedAreaTail);
    }

    // maximal runs of minimizing indices
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if minimizing[i] {
            let start = i;
            while i + 1 < n && minimizing[i + 1] {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }

    let mut segments: Vec<(f64, f64)> = Vec::new();
    for (k, &(a_idx, b_idx)) in runs.iter().enumerate() {
        let mut lo = grid[a_idx];
        let mut hi_s = grid[b_idx];
        if k > 0 || a_idx > 0 {
            // this run begins after a gap: its true start is the local area
            // minimum just before/at the first flagged point
            lo = refine_local_min(metric, &grid, a_idx);
        }
        if k + 1 < runs.len() {
            // the run ends where the area reaches the level of the next
            // run's landing minimum
            let land = refine_local_min(metric, &grid, runs[k + 1].0);
            let a_star = area_of(metric, land);
            hi_s = refine_area_crossing(metric, &grid, b_idx, a_star).unwrap_or(hi_s);
        }
        segments.push((lo, hi_s));
    }
    if segments.is_empty() {
        return Err(Error::UnboundedAreaTail);
    }
    Ok(FlowRoute { segments })
}

/// Root of R' (equivalently of dArea/ds) near grid index `idx`.
fn refine_local_min(metric: &RadialMetric, grid: &[f64], idx: usize) -> f64 {
    let lo_idx = idx.saturating_sub(3);
    let hi_idx = (idx + 3).min(grid.len() - 1);
    let rp = |s: f64| metric.areal_radius_deriv(s);
    for j in lo_idx..hi_idx {
        let (a, b) = (grid[j], grid[j + 1]);
        if rp(a) <= 0.0 && rp(b) >= 0.0 {
            if let Some(root) = bisect(rp, a, b, 1e-15) {
                return root;
            }
        }
    }
    grid[idx]
}

/// Coordinate in [grid[idx], grid[idx+1]] where the area reaches `a_star`.
fn refine_area_crossing(
    metric: &RadialMetric,
    grid: &[f64],
    idx: usize,
    a_star: f64,
) -> Option<f64> {
    let hi = (idx + 2).min(grid.len() - 1);
    let lo = idx.saturating_sub(1);
    bisect(|s| area_of(metric, s) - a_star, grid[lo], grid[hi], 1e-15)
}

impl FlowRoute {
    fn last_area(&self, metric: &RadialMetric) -> f64 {
        area_of(metric, self.segments.last().unwrap().1)
    }

    /// Invert the area law: the flow coordinate whose sphere has area `b`.
    /// Takes the outermost admissible segment (post-jump convention at the
    /// jump areas themselves).
    fn coordinate_of_area(&self, metric: &RadialMetric, b: f64) -> f64 {
        let mut chosen = self.segments[0];
        for seg in &self.segments {
            if area_of(metric, seg.0) <= b * (1.0 + 1e-13) {
                chosen = *seg;
            }
        }
        let (lo, hi) = chosen;
        if b <= area_of(metric, lo) {
            return lo;
        }
        if b >= area_of(metric, hi) {
            return hi;
        }
        bisect(|s| area_of(metric, s) - b, lo, hi, 1e-15).unwrap_or(hi)
    }
}

/// Strictly minimizing hull of the centered ball at `s`: the smallest
/// s' >= s whose sphere area is below every area further out and below the
/// area at `s` itself. Equals `s` exactly when the ball is already a
/// minimizing hull.
pub fn minimizing_hull(metric: &RadialMetric, s: f64) -> Result<f64> {
    let (lo, hi) = metric.domain();
    if !metric.contains(s) {
        return Err(Error::OutOfDomain { s, lo, hi });
    }
    let route = build_route(metric, s)?;
    Ok(route.segments[0].0.max(s.min(route.segments[0].0)))
}

/// Advance the weak flow from `s0` to flow time `t_max` with `n` samples
/// uniform in t. Jumps are resolved through the minimizing-hull envelope;
/// a start sphere that is not a minimizing hull produces an instantaneous
/// jump at t = 0 (recorded with unequal areas).
pub fn exact_flow(metric: &RadialMetric, s0: f64, t_max: f64, n: usize) -> Result<FlowProfile> {
    let (lo, hi) = metric.domain();
    if !metric.contains(s0) {
        return Err(Error::OutOfDomain { s: s0, lo, hi });
    }
    if !(t_max > 0.0) || n < 2 {
        return Err(Error::InvalidConfig {
            field: "t_max/samples".into(),
            message: format!("need t_max > 0 and n >= 2, got t_max={t_max}, n={n}"),
        });
    }
    let route = build_route(metric, s0)?;
    let vol0 = metric.enclosed_volume(s0)?;
    let rel_vol = |s: f64| -> Result<f64> { Ok(metric.enclosed_volume(s)? - vol0) };

    let mut jumps: Vec<JumpEvent> = Vec::new();
    let first_lo = route.segments[0].0;
    let start_min = (first_lo - s0).abs() <= 1e-9 * (1.0 + s0.abs());
    let b0 = if start_min {
        area_of(metric, s0)
    } else {
        // instantaneous jump at t = 0
        jumps.push(JumpEvent {
            t1: 0.0,
            s_before: s0,
            s_after: first_lo,
            v_before: 0.0,
            v_after: rel_vol(first_lo)?,
        });
        area_of(metric, first_lo)
    };

    let t_end = (route.last_area(metric) / b0).ln();
    let truncated = t_max > t_end;
    let t_hi = if truncated { t_end } else { t_max };

    // interior jumps crossed within [0, t_hi]
    for k in 0..route.segments.len() - 1 {
        let s_before = route.segments[k].1;
        let s_after = route.segments[k + 1].0;
        let a_star = area_of(metric, s_before);
        let t1 = (a_star / b0).ln();
        if t1 >= -1e-12 && t1 <= t_hi + 1e-12 {
            jumps.push(JumpEvent {
                t1: t1.max(0.0),
                s_before,
                s_after,
                v_before: rel_vol(s_before)?,
                v_after: rel_vol(s_after)?,
            });
        }
    }

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = t_hi * i as f64 / (n - 1) as f64;
        let b = b0 * t.exp();
        let s = route.coordinate_of_area(metric, b);
        let h = metric.mean_curvature(s);
        if h < -1e-9 {
            return Err(Error::FlowUndefined { s, h });
        }
        samples.push(FlowSample {
            t,
            s,
            area: area_of(metric, s),
            hawking_mass: metric.hawking_mass(s),
            volume: rel_vol(s)?,
            mean_curvature: h,
        });
    }

    Ok(FlowProfile {
        metric: metric.clone(),
        start: s0,
        samples,
        jumps,
        truncated,
        route,
        base_volume: vol0,
        initial_area: b0,
    })
}

impl FlowProfile {
    /// Area of the start sphere after resolving an instantaneous start jump.
    pub fn initial_area(&self) -> f64 {
        self.initial_area
    }

    pub fn max_volume(&self) -> f64 {
        self.samples.last().map(|s| s.volume).unwrap_or(0.0)
    }

    /// t(v) = inf { tau : Vol(G_tau) >= v }: nondecreasing, constant on jump
    /// volume intervals, interpolated between samples elsewhere.
    pub fn time_of_volume(&self, v: f64) -> Result<f64> {
        let vmax = self.max_volume();
        if v < -1e-12 || v > vmax * (1.0 + 1e-12) {
            return Err(Error::VolumeOutOfRange { v, max: vmax });
        }
        let v = v.clamp(0.0, vmax);
        for j in &self.jumps {
            if v > j.v_before && v <= j.v_after {
                return Ok(j.t1);
            }
        }
        // exact inversion through the route: t = ln(area(s_v)/B0)
        let (_, _, b, _) = self.state_at_volume(v)?;
        Ok((b / self.initial_area).ln().max(0.0))
    }

    /// Flow state (t, s, B, m) at relative enclosed volume v. On a jump
    /// volume interval the pre-jump sphere is used, matching t(v) = t1.
    pub fn state_at_volume(&self, v: f64) -> Result<(f64, f64, f64, f64)> {
        let vmax = self.max_volume();
        if v < -1e-12 || v > vmax * (1.0 + 1e-12) {
            return Err(Error::VolumeOutOfRange { v, max: vmax });
        }
        let v = v.clamp(0.0, vmax);
        for j in &self.jumps {
            if v > j.v_before && v <= j.v_after && j.t1 > 0.0 {
                let s = j.s_before;
                return Ok((j.t1, s, self.metric.area(s), self.metric.hawking_mass(s)));
            }
        }
        let target = self.base_volume + v;
        // locate the route segment whose volume range contains the target
        let mut seg = self.route.segments[0];
        for cand in &self.route.segments {
            if self.metric.enclosed_volume(cand.0)? <= target * (1.0 + 1e-12) + 1e-300 {
                seg = *cand;
            }
        }
        let s = if target <= self.metric.enclosed_volume(seg.0)? {
            seg.0
        } else if target >= self.metric.enclosed_volume(seg.1)? {
            seg.1
        } else {
            bisect(
                |x| self.metric.enclosed_volume(x).unwrap_or(f64::NAN) - target,
                seg.0,
                seg.1,
                1e-13,
            )
            .ok_or(Error::VolumeOutOfRange { v, max: vmax })?
        };
        let t = (self.metric.area(s) / self.initial_area).ln().max(0.0);
        Ok((t, s, self.metric.area(s), self.metric.hawking_mass(s)))
    }

    /// Integral of a pointwise quantity over the volume parameter,
    /// int_0^v g(w) dw, where g is evaluated through the flow state at
    /// volume w: on flow segments dw = 4 pi R^2 sqrt(A) ds and g sees the
    /// sphere coordinate; across a jump volume interval the pre-jump sphere
    /// is frozen, so g contributes a constant times the interval length.
    /// Returns (value, quadrature error estimate).
    pub fn integrate_over_volume<G: Fn(f64) -> f64>(&self, v: f64, g: G) -> Result<(f64, f64)> {
        let vmax = self.max_volume();
        if v < -1e-12 || v > vmax * (1.0 + 1e-12) {
            return Err(Error::VolumeOutOfRange { v, max: vmax });
        }
        let v = v.clamp(0.0, vmax);
        let (_, s_v, _, _) = self.state_at_volume(v)?;
        let mut total = 0.0;
        let mut err = 0.0;
        for j in &self.jumps {
            let hi = j.v_after.min(v);
            if hi > j.v_before {
                total += g(j.s_before) * (hi - j.v_before);
            }
        }
        for seg in &self.route.segments {
            if seg.0 >= s_v {
                break;
            }
            let hi = seg.1.min(s_v);
            if hi <= seg.0 {
                continue;
            }
            let q = crate::quad::integrate(
                |s| g(s) * self.metric.volume_density(s),
                seg.0,
                hi,
                1e-11,
                1e-290,
            );
            total += q.value;
            err += q.error;
        }
        Ok((total, err))
    }

    /// Level-set function of the flow: the time at which the flow sphere
    /// passes coordinate `s` (defined on the route segments).
    pub fn time_of_coordinate(&self, s: f64) -> Result<f64> {
        for seg in &self.route.segments {
            if s >= seg.0 - 1e-12 && s <= seg.1 + 1e-12 {
                return Ok((self.metric.area(s) / self.initial_area).ln().max(0.0));
            }
        }
        let (lo, hi) = self.metric.domain();
        Err(Error::OutOfDomain { s, lo, hi })
    }

    /// Sample indices split into maximal runs not interrupted by jumps.
    fn segment_runs(&self) -> Vec<Vec<usize>> {
        let mut runs = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        let mut jump_iter = self.jumps.iter().filter(|j| j.t1 > 0.0).peekable();
        for (i, sample) in self.samples.iter().enumerate() {
            while let Some(j) = jump_iter.peek() {
                if sample.t > j.t1 {
                    jump_iter.next();
                    if !current.is_empty() {
                        runs.push(std::mem::take(&mut current));
                    }
                } else {
                    break;
                }
            }
            current.push(i);
        }
        if !current.is_empty() {
            runs.push(current);
        }
        runs
    }
}

/// Report of the coarea identity dv/dt = B/H along the sampled flow.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeGrowthReport {
    pub max_rel_deviation: Option<f64>,
    pub checked_samples: usize,
    pub skipped_degenerate: usize,
    pub segments_checked: usize,
    pub segments_skipped: usize,
    pub sufficient_samples: bool,
}

/// Compare the finite-difference volume growth dv/dt against B/H (the
/// coarea value with H constant on centered spheres). Segments shorter than
/// 16 samples are skipped and reported.
pub fn volume_growth_check(profile: &FlowProfile) -> VolumeGrowthReport {
    let mut max_dev: Option<f64> = None;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut seg_checked = 0usize;
    let mut seg_skipped = 0usize;

    for run in profile.segment_runs() {
        if run.len() < 16 {
            seg_skipped += 1;
            continue;
        }
        seg_checked += 1;
        for w in run.windows(3) {
            let (a, b, c) = (profile.samples[w[0]], profile.samples[w[1]], profile.samples[w[2]]);
            if b.mean_curvature <= 1e-12 {
                skipped += 1;
                continue;
            }
            let fd = (c.volume - a.volume) / (c.t - a.t);
            let expected = b.area / b.mean_curvature;
            let dev = ((fd - expected) / expected).abs();
            max_dev = Some(max_dev.map_or(dev, |m: f64| m.max(dev)));
            checked += 1;
        }
    }
    VolumeGrowthReport {
        max_rel_deviation: max_dev,
        checked_samples: checked,
        skipped_degenerate: skipped,
        segments_checked: seg_checked,
        segments_skipped: seg_skipped,
        sufficient_samples: seg_checked > 0,
    }
}

/// Report on the Lipschitz bound dt/dv <= sqrt(int H^2) Area^{-3/2}.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    /// most positive (worst) value of (dt/dv - bound)/bound
    pub worst_margin: Option<f64>,
    /// largest |dt/dv - bound|/bound: the bound is an equality in the
    /// radial class, so this measures pure discretization error
    pub max_equality_deviation: Option<f64>,
    pub checked_samples: usize,
    pub jump_intervals_trivial: usize,
    pub pass: bool,
}

pub fn lipschitz_bound_check(profile: &FlowProfile) -> LipschitzReport {
    let mut worst: Option<f64> = None;
    let mut max_eq: Option<f64> = None;
    let mut checked = 0usize;

    for run in profile.segment_runs() {
        if run.len() < 3 {
            continue;
        }
        for w in run.windows(3) {
            let (a, b, c) = (profile.samples[w[0]], profile.samples[w[1]], profile.samples[w[2]]);
            if b.mean_curvature <= 1e-12 {
                continue;
            }
            let fd = (c.t - a.t) / (c.volume - a.volume);
            let h2_integral = b.mean_curvature * b.mean_curvature * b.area;
            let bound = h2_integral.sqrt() / b.area.powf(1.5);
            let margin = (fd - bound) / bound;
            worst = Some(worst.map_or(margin, |m: f64| m.max(margin)));
            max_eq = Some(max_eq.map_or(margin.abs(), |m: f64| m.max(margin.abs())));
            checked += 1;
        }
    }
    let pass = worst.map_or(true, |w| w <= 1e-3);
    LipschitzReport {
        worst_margin: worst,
        max_equality_deviation: max_eq,
        checked_samples: checked,
        jump_intervals_trivial: profile.jumps.len(),
        pass,
    }
}

/// Report on Hawking-mass monotonicity along the flow.
#[derive(Debug, Clone, Serialize)]
pub struct GerochReport {
    pub hypothesis_met: bool,
    pub min_scalar_curvature: f64,
    pub min_increment: f64,
    pub final_mass: f64,
    pub pass: bool,
}

/// Check that m(t) is nondecreasing. The nonnegative-scalar-curvature
/// hypothesis is verified on the flow range first; a violation downgrades
/// the verdict to "hypothesis not met" rather than failing.
pub fn geroch_check(profile: &FlowProfile) -> GerochReport {
    let (dom_lo, dom_hi) = profile.metric.domain();
    let s_first = profile.samples.first().map(|s| s.s).unwrap_or(dom_lo);
    let s_last = profile.samples.last().map(|s| s.s).unwrap_or(dom_hi);
    let mut min_scal = f64::INFINITY;
    let mut max_abs = 0.0f64;
    let n = 257;
    for i in 0..n {
        let mut s = s_first + (s_last - s_first) * i as f64 / (n - 1) as f64;
        // keep strictly inside the metric domain for the curvature formula
        let eps = 1e-9 * (1.0 + s.abs());
        s = s.clamp(dom_lo + eps, dom_hi - eps);
        if let Ok(scal) = crate::geometry::scalar_curvature(&profile.metric, s) {
            min_scal = min_scal.min(scal);
            max_abs = max_abs.max(scal.abs());
        }
    }
    let hypothesis_met = min_scal >= -1e-8 * (1.0 + max_abs);

    let mut min_inc = f64::INFINITY;
    let mut max_m = 0.0f64;
    for w in profile.samples.windows(2) {
        min_inc = min_inc.min(w[1].hawking_mass - w[0].hawking_mass);
        max_m = max_m.max(w[1].hawking_mass.abs());
    }
    let final_mass = profile.samples.last().map(|s| s.hawking_mass).unwrap_or(0.0);
    let pass = hypothesis_met && min_inc >= -1e-8 * (1.0 + max_m);
    GerochReport {
        hypothesis_met,
        min_scalar_curvature: min_scal,
        min_increment: min_inc,
        final_mass,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_preset;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn euclid() -> RadialMetric {
        make_preset("euclidean", &BTreeMap::new()).unwrap()
    }
    fn schwarzschild(m: f64) -> RadialMetric {
        make_preset("schwarzschild-areal", &BTreeMap::from([("m".to_string(), m)])).unwrap()
    }
    fn neck() -> RadialMetric {
        make_preset("neck", &BTreeMap::new()).unwrap()
    }

    /// Brute-force envelope oracle on an independent fine grid: the jump of
    /// the weak flow from `s0` is located by scanning raw pointwise area
    /// samples of the metric, with no hull or refinement machinery.
    fn neck_jump_oracle(metric: &RadialMetric, s0: f64) -> (f64, f64, f64, f64, f64) {
        let n = 16385usize;
        let (lo, hi) = (s0, 12.0);
        let s: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let a: Vec<f64> = s.iter().map(|&x| metric.area(x)).collect();
        let mut env = vec![0.0; n];
        env[n - 1] = a[n - 1];
        for i in (0..n - 1).rev() {
            env[i] = a[i].min(env[i + 1]);
        }
        let tol = 1e-12 * a.iter().cloned().fold(0.0, f64::max);
        let min_flag: Vec<bool> = (0..n).map(|i| a[i] <= env[i] + tol).collect();
        let first_gap = min_flag.iter().position(|f| !f).expect("neck has a gap");
        let land = (first_gap..n).find(|&i| min_flag[i]).expect("gap closes");
        let s_jump = s[first_gap - 1];
        let s_land = s[land];
        // trapezoid volumes (A = 1)
        let mut vol = vec![0.0; n];
        for i in 1..n {
            vol[i] = vol[i - 1] + 0.5 * (a[i] + a[i - 1]) * (s[i] - s[i - 1]);
        }
        let cell = s[1] - s[0];
        (s_jump, s_land, vol[first_gap - 1], vol[land], cell)
    }

    #[test]
    fn flat_flow_doubles_radius_after_two_log_two() {
        let profile = exact_flow(&euclid(), 1.0, 2.0 * 2f64.ln(), 64).unwrap();
        let last = profile.samples.last().unwrap();
        assert!((last.s - 2.0).abs() < 1e-10, "s = {}", last.s);
        assert!((last.area - 16.0 * PI).abs() < 1e-8);
        assert!((last.volume - 4.0 / 3.0 * PI * 7.0).abs() < 1e-8);
        assert!(profile.jumps.is_empty());
        assert!(!profile.truncated);
    }

    #[test]
    fn horizon_flow_keeps_hawking_mass() {
        let profile = exact_flow(&schwarzschild(1.0), 2.0, 2.0 * 2f64.ln(), 64).unwrap();
        let last = profile.samples.last().unwrap();
        assert!((last.s - 4.0).abs() < 1e-9, "rho = {}", last.s);
        for s in &profile.samples {
            assert!((s.hawking_mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_area_law_between_jumps() {
        for (metric, s0) in [(euclid(), 0.5), (schwarzschild(1.0), 2.0)] {
            let profile = exact_flow(&metric, s0, 3.0, 257).unwrap();
            let b0 = profile.samples[0].area;
            for s in &profile.samples {
                let rel = (s.area * (-s.t).exp() - b0).abs() / b0;
                assert!(rel < 1e-8, "area law violated: {rel}");
            }
        }
    }

    #[test]
    fn neck_flow_emits_exactly_one_jump_with_equal_areas() {
        let metric = neck();
        let profile = exact_flow(&metric, 1.0, 3.0, 257).unwrap();
        assert_eq!(profile.jumps.len(), 1, "jumps: {:?}", profile.jumps);
        let j = profile.jumps[0];
        assert!(j.s_after > j.s_before);
        assert!(j.v_after > j.v_before);
        let a_before = metric.area(j.s_before);
        let a_after = metric.area(j.s_after);
        assert!(
            (a_before - a_after).abs() <= 1e-8 * a_before,
            "area mismatch across jump: {a_before} vs {a_after}"
        );

        // independent brute-force envelope oracle
        let (s_jump, s_land, v_before, v_after, cell) = neck_jump_oracle(&metric, 1.0);
        assert!((j.s_before - s_jump).abs() <= cell, "jump start {} vs oracle {}", j.s_before, s_jump);
        assert!((j.s_after - s_land).abs() <= cell, "jump land {} vs oracle {}", j.s_after, s_land);
        // volumes within one oracle cell of local volume change (the oracle
        // trapezoids start at the same s0, so both sides are start-relative)
        let dv_cell = 4.0 * PI * metric.areal_radius(s_land).powi(2) * cell * 2.0;
        assert!((j.v_before - v_before).abs() <= dv_cell, "v_before {} vs {}", j.v_before, v_before);
        assert!((j.v_after - v_after).abs() <= dv_cell, "v_after {} vs {}", j.v_after, v_after);

        // t(v) is constant across the jump interval
        let tmid = profile
            .time_of_volume(0.5 * (j.v_before + j.v_after))
            .unwrap();
        assert!((tmid - j.t1).abs() < 1e-12);
        let t_hi = profile.time_of_volume(j.v_after * 0.999999).unwrap();
        assert!((t_hi - j.t1).abs() < 1e-12);
    }

    #[test]
    fn minimizing_hull_identity_on_monotone_profiles() {
        assert!((minimizing_hull(&euclid(), 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((minimizing_hull(&schwarzschild(1.0), 3.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn minimizing_hull_jumps_past_the_neck() {
        let metric = neck();
        let (s_jump, s_land, _, _, cell) = neck_jump_oracle(&metric, 1.0);
        // point strictly inside the basin
        let s = 0.5 * (s_jump + 4.0);
        let hull = minimizing_hull(&metric, s).unwrap();
        assert!(
            (hull - s_land).abs() <= cell + 1e-6,
            "hull {hull} vs oracle land {s_land}"
        );
        // ... and its area is not above the ball's own area
        assert!(metric.area(hull) <= metric.area(s) * (1.0 + 1e-12));
    }

    #[test]
    fn time_of_volume_matches_flat_closed_form() {
        let profile = exact_flow(&euclid(), 1e-3, 16.0, 512).unwrap();
        // t(v) such that rho(t) = (3(v + v0)/4pi)^{1/3}; at v = vol(1) - v0 the
        // time is 2 ln(1/s0)
        let v0 = 4.0 / 3.0 * PI * 1e-9;
        let v = 4.0 / 3.0 * PI - v0;
        let t = profile.time_of_volume(v).unwrap();
        let expected = 2.0 * (1.0f64 / 1e-3).ln();
        assert!(
            (t - expected).abs() < 1e-6,
            "t(v) = {t}, expected {expected}"
        );
        assert!(profile.time_of_volume(0.0).unwrap().abs() < 1e-12);
        assert!(profile.time_of_volume(-1.0).is_err());
    }

    #[test]
    fn time_of_volume_is_nondecreasing() {
        let profile = exact_flow(&neck(), 1.0, 3.0, 257).unwrap();
        let vmax = profile.max_volume();
        let mut prev = 0.0;
        for i in 0..=300 {
            let v = vmax * i as f64 / 300.0;
            let t = profile.time_of_volume(v).unwrap();
            assert!(t >= prev - 1e-12, "t(v) decreased at v={v}");
            prev = t;
        }
        // round trip at non-jump samples
        for s in profile.samples.iter().step_by(16) {
            let inside_jump = profile
                .jumps
                .iter()
                .any(|j| s.volume > j.v_before - 1e-9 && s.volume <= j.v_after + 1e-9);
            if !inside_jump {
                let t = profile.time_of_volume(s.volume).unwrap();
                assert!((t - s.t).abs() < 1e-8, "round trip t {} vs {}", t, s.t);
            }
        }
    }

    #[test]
    fn volume_growth_matches_coarea_value() {
        let flat = exact_flow(&euclid(), 1.0, 2.0, 512).unwrap();
        let r = volume_growth_check(&flat);
        assert!(r.sufficient_samples);
        assert!(
            r.max_rel_deviation.unwrap() <= 1e-4,
            "flat deviation {:?}",
            r.max_rel_deviation
        );

        let schw = exact_flow(&schwarzschild(1.0), 2.5, 2.0, 512).unwrap();
        let r = volume_growth_check(&schw);
        assert!(r.max_rel_deviation.unwrap() <= 1e-4, "{:?}", r.max_rel_deviation);
    }

    #[test]
    fn volume_growth_flags_insufficient_samples() {
        let flat = exact_flow(&euclid(), 1.0, 1.0, 8).unwrap();
        let r = volume_growth_check(&flat);
        assert!(!r.sufficient_samples);
        assert_eq!(r.segments_skipped, 1);
    }

    #[test]
    fn lipschitz_bound_is_equality_in_the_radial_class() {
        for (metric, s0) in [(euclid(), 1.0), (schwarzschild(1.0), 2.5)] {
            let profile = exact_flow(&metric, s0, 2.0, 512).unwrap();
            let r = lipschitz_bound_check(&profile);
            assert!(r.pass);
            assert!(
                r.max_equality_deviation.unwrap() <= 1e-4,
                "deviation {:?}",
                r.max_equality_deviation
            );
        }
    }

    #[test]
    fn geroch_constant_mass_for_schwarzschild() {
        let profile = exact_flow(&schwarzschild(1.0), 2.0, 4.0, 256).unwrap();
        let r = geroch_check(&profile);
        assert!(r.hypothesis_met);
        assert!(r.pass);
        assert!(r.min_increment.abs() < 1e-10);
    }

    #[test]
    fn geroch_flat_mass_is_zero() {
        let profile = exact_flow(&euclid(), 0.5, 3.0, 128).unwrap();
        let r = geroch_check(&profile);
        assert!(r.pass);
        for s in &profile.samples {
            assert!(s.hawking_mass.abs() < 1e-12);
        }
    }

    #[test]
    fn flow_is_deterministic() {
        let a = exact_flow(&neck(), 1.0, 3.0, 257).unwrap();
        let b = exact_flow(&neck(), 1.0, 3.0, 257).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.jumps, b.jumps);
    }

    #[test]
    fn truncation_is_flagged() {
        let small = make_preset(
            "euclidean",
            &BTreeMap::from([("s_max".to_string(), 10.0)]),
        )
        .unwrap();
        let profile = exact_flow(&small, 1.0, 50.0, 64).unwrap();
        assert!(profile.truncated);
        let last = profile.samples.last().unwrap();
        assert!(last.s <= 10.0 + 1e-9);
    }

    #[test]
    fn monotone_samples_invariants() {
        let profile = exact_flow(&neck(), 1.0, 3.0, 257).unwrap();
        for w in profile.samples.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].area > w[0].area);
            assert!(w[1].volume > w[0].volume);
        }
        // Hawking mass cap along the flow
        for s in &profile.samples {
            let cap = (s.area / (16.0 * PI)).sqrt();
            assert!(s.hawking_mass <= cap + 1e-12 * (1.0 + cap));
        }
    }
}
