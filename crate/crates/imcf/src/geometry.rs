//! Spherically symmetric metrics g = A(s) ds^2 + R(s)^2 g_{S^2} and their
//! pointwise geometry: sphere areas, mean curvature, Hawking mass, enclosed
//! volume, scalar curvature, ADM mass and asymptotic-decay verification.
//!
//! Internally the radial coefficient is carried as w(s) = 1/A(s) together
//! with its derivative. This keeps every formula finite at a horizon
//! (w -> 0 while A blows up): the mean curvature is 2 R' sqrt(w) / R and the
//! Hawking mass of a centered sphere reduces to (R/2) (1 - R'^2 w).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quad::{bisect, integrate, richardson};

/// Default outer coordinate for the open-ended presets.
const DEFAULT_OUTER: f64 = 1.0e6;

#[derive(Debug, Clone)]
enum MetricForm {
    Euclidean,
    /// Exterior Schwarzschild in areal coordinates, domain [2m, s_max].
    SchwarzschildAreal { mass: f64 },
    /// Conformally flat phi^4 * delta with phi = 1 + (m/2)(r^2+b^2)^{-1/2}.
    CoredSchwarzschild { mass: f64, core: f64 },
    /// Round sphere of radius lambda/2 in stereographic radial coordinates.
    RoundCap { lambda: f64 },
    Tabulated { radius: MonotoneCubic, coeff: MonotoneCubic },
    Glued {
        inner: Box<RadialMetric>,
        band_lo: f64,
        band_hi: f64,
        lambda: f64,
    },
}

/// A warped-product metric on an interval of the radial coordinate.
#[derive(Debug, Clone)]
pub struct RadialMetric {
    form: MetricForm,
    s_min: f64,
    s_max: f64,
    /// lazily built cumulative-volume table; volume queries reduce to one
    /// short quadrature from the nearest table knot
    volume_cache: OnceLock<VolumeTable>,
}

#[derive(Debug, Clone)]
struct VolumeTable {
    knots: Vec<f64>,
    /// integral of the volume weight over each knot cell; kept per-cell (not
    /// cumulative) so shell volumes are sums of positive terms and stay
    /// relatively accurate even far from the base point
    cells: Vec<f64>,
}

/// Pointwise data of the centered sphere at coordinate s.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SphereGeometry {
    pub s: f64,
    pub area: f64,
    pub mean_curvature: f64,
    pub hawking_mass: f64,
    pub enclosed_volume: f64,
}

/// Specification of the capped comparison metric used for the exterior
/// monotonicity argument: inner metric inside `transition_radius + 5`,
/// a blend across one unit, and a round spherical cap outside.
#[derive(Debug, Clone)]
pub struct GluedMetricSpec {
    pub inner_metric: RadialMetric,
    pub transition_radius: f64,
    pub cap_scale: f64,
}

/// Result of sampling the decay conditions |sigma| + r|dsigma| + r^2|ddsigma| <= C/r.
#[derive(Debug, Clone, Serialize)]
pub struct AFDecayReport {
    pub passes: bool,
    pub witnessed_constant: f64,
    /// rows of (r, |sigma|, r |d sigma|, r^2 |dd sigma|)
    pub samples: Vec<(f64, f64, f64, f64)>,
}

fn new_metric(form: MetricForm, s_min: f64, s_max: f64) -> RadialMetric {
    RadialMetric { form, s_min, s_max, volume_cache: OnceLock::new() }
}

fn positive(params: &BTreeMap<String, f64>, key: &str, name: &'static str) -> Result<f64> {
    let v = *params
        .get(key)
        .ok_or(Error::NonPositiveParameter { name, value: f64::NAN })?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::NonPositiveParameter { name, value: v });
    }
    Ok(v)
}

fn check_keys(params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::InvalidConfig {
                field: format!("params.{k}"),
                message: format!("unknown parameter (allowed: {})", allowed.join(", ")),
            });
        }
    }
    Ok(())
}

/// Build one of the preset metrics.
///
/// Presets: `euclidean`, `schwarzschild-areal` (m), `cored-schwarzschild`
/// (m, b), `neck` (tabulated areal radius with one interior dip; optional
/// depth/center/width), `round-3-sphere-cap` (lambda). All open-ended
/// presets accept an `s_max` override.
pub fn make_preset(name: &str, params: &BTreeMap<String, f64>) -> Result<RadialMetric> {
    let s_max_override = params.get("s_max").copied();
    if let Some(sm) = s_max_override {
        if !(sm > 0.0) {
            return Err(Error::NonPositiveParameter { name: "s_max", value: sm });
        }
    }
    match name {
        "euclidean" => {
            check_keys(params, &["s_max"])?;
            Ok(new_metric(
                MetricForm::Euclidean,
                0.0,
                s_max_override.unwrap_or(DEFAULT_OUTER),
            ))
        }
        "schwarzschild-areal" => {
            check_keys(params, &["m", "s_max"])?;
            let m = positive(params, "m", "m")?;
            let s_max = s_max_override.unwrap_or(DEFAULT_OUTER * m.max(1.0));
            if s_max <= 2.0 * m {
                return Err(Error::InvalidMetric(format!(
                    "s_max = {s_max} must exceed the horizon radius {h}",
                    h = 2.0 * m
                )));
            }
            Ok(new_metric(MetricForm::SchwarzschildAreal { mass: m }, 2.0 * m, s_max))
        }
        "cored-schwarzschild" => {
            check_keys(params, &["m", "b", "s_max"])?;
            let m = positive(params, "m", "m")?;
            let b = positive(params, "b", "b")?;
            Ok(new_metric(
                MetricForm::CoredSchwarzschild { mass: m, core: b },
                0.0,
                s_max_override.unwrap_or(DEFAULT_OUTER * m.max(b).max(1.0)),
            ))
        }
        "round-3-sphere-cap" => {
            check_keys(params, &["lambda", "s_max"])?;
            let lambda = positive(params, "lambda", "lambda")?;
            Ok(new_metric(
                MetricForm::RoundCap { lambda },
                0.0,
                s_max_override.unwrap_or(50.0 * lambda),
            ))
        }
        "neck" => {
            check_keys(params, &["depth", "center", "width"])?;
            let depth = params.get("depth").copied().unwrap_or(0.55);
            let center = params.get("center").copied().unwrap_or(4.0);
            let width = params.get("width").copied().unwrap_or(1.0);
            if !(depth > 0.0 && depth < 1.0) {
                return Err(Error::InvalidMetric(format!("neck depth must be in (0,1), got {depth}")));
            }
            if !(center > 0.0) {
                return Err(Error::NonPositiveParameter { name: "center", value: center });
            }
            if !(width > 0.0) {
                return Err(Error::NonPositiveParameter { name: "width", value: width });
            }
            let n = 2048usize;
            let (lo, hi) = (0.25, 12.0);
            let mut s = Vec::with_capacity(n);
            let mut r = Vec::with_capacity(n);
            let mut a = Vec::with_capacity(n);
            for i in 0..n {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let g = ((x - center) / width).powi(2);
                s.push(x);
                r.push(x * (1.0 - depth * (-g).exp()));
                a.push(1.0);
            }
            RadialMetric::from_samples(s, a, r)
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

impl RadialMetric {
    /// Tabulated metric from sampled coordinates, radial coefficients A and
    /// areal radii R. Requires at least 8 strictly increasing samples with
    /// positive A and R.
    pub fn from_samples(s: Vec<f64>, a: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if s.len() < 8 {
            return Err(Error::InvalidMetric(format!(
                "tabulated metrics need at least 8 samples, got {}",
                s.len()
            )));
        }
        if a.iter().any(|v| !(*v > 0.0)) || r.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidMetric("tabulated A and R values must be positive".into()));
        }
        let (lo, hi) = (s[0], *s.last().unwrap());
        let radius = MonotoneCubic::new(s.clone(), r)?;
        let coeff = MonotoneCubic::new(s, a)?;
        Ok(new_metric(MetricForm::Tabulated { radius, coeff }, lo, hi))
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.s_min, self.s_max)
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.s_min && s <= self.s_max
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if !self.contains(s) {
            return Err(Error::OutOfDomain { s, lo: self.s_min, hi: self.s_max });
        }
        Ok(())
    }

    /// Areal radius R(s).
    pub fn areal_radius(&self, s: f64) -> f64 {
        match &self.form {
            MetricForm::Euclidean => s,
            MetricForm::SchwarzschildAreal { .. } => s,
            MetricForm::CoredSchwarzschild { mass, core } => {
                let phi = 1.0 + 0.5 * mass / (s * s + core * core).sqrt();
                phi * phi * s
            }
            MetricForm::RoundCap { lambda } => s / (1.0 + (s / lambda).powi(2)),
            MetricForm::Tabulated { radius, .. } => radius.eval(s),
            MetricForm::Glued { inner, band_lo, band_hi, lambda } => {
                if s < *band_lo {
                    inner.areal_radius(s)
                } else if s > *band_hi {
                    cap_r(s, *lambda)
                } else {
                    let eta = blend(s, *band_lo);
                    let ri = inner.areal_radius(s);
                    let rs = cap_r(s, *lambda);
                    (eta * ri * ri + (1.0 - eta) * rs * rs).sqrt()
                }
            }
        }
    }

    /// dR/ds.
    pub fn areal_radius_deriv(&self, s: f64) -> f64 {
        match &self.form {
            MetricForm::Euclidean | MetricForm::SchwarzschildAreal { .. } => 1.0,
            MetricForm::CoredSchwarzschild { mass, core } => {
                let (phi, dphi, _) = cored_phi(s, *mass, *core);
                phi * phi + 2.0 * phi * dphi * s
            }
            MetricForm::RoundCap { lambda } => {
                let x2 = (s / lambda).powi(2);
                (1.0 - x2) / (1.0 + x2).powi(2)
            }
            MetricForm::Tabulated { radius, .. } => radius.deriv(s),
            MetricForm::Glued { inner, band_lo, band_hi, lambda } => {
                if s < *band_lo {
                    inner.areal_radius_deriv(s)
                } else if s > *band_hi {
                    cap_r_deriv(s, *lambda)
                } else {
                    let (p, dp, _) = glued_radius_sq(inner, s, *band_lo, *lambda);
                    dp / (2.0 * p.sqrt())
                }
            }
        }
    }

    /// d^2 R / ds^2.
    pub fn areal_radius_second(&self, s: f64) -> f64 {
        match &self.form {
            MetricForm::Euclidean | MetricForm::SchwarzschildAreal { .. } => 0.0,
            MetricForm::CoredSchwarzschild { mass, core } => {
                let (phi, dphi, ddphi) = cored_phi(s, *mass, *core);
                2.0 * dphi * dphi * s + 2.0 * phi * ddphi * s + 4.0 * phi * dphi
            }
            MetricForm::RoundCap { lambda } => {
                let x2 = (s / lambda).powi(2);
                (-2.0 * s / (lambda * lambda)) * (3.0 - x2) / (1.0 + x2).powi(3)
            }
            MetricForm::Tabulated { radius, .. } => radius.second_deriv(s),
            MetricForm::Glued { inner, band_lo, band_hi, lambda } => {
                if s < *band_lo {
                    inner.areal_radius_second(s)
                } else if s > *band_hi {
                    cap_r_second(s, *lambda)
                } else {
                    let (p, dp, ddp) = glued_radius_sq(inner, s, *band_lo, *lambda);
                    let sq = p.sqrt();
                    ddp / (2.0 * sq) - dp * dp / (4.0 * p * sq)
                }
            }
        }
    }

    /// w(s) = 1/A(s); vanishes at a horizon, positive elsewhere.
    pub fn inv_coeff(&self, s: f64) -> f64 {
        match &self.form {
            MetricForm::Euclidean => 1.0,
            MetricForm::SchwarzschildAreal { mass } => 1.0 - 2.0 * mass / s,
            MetricForm::CoredSchwarzschild { mass, core } => {
                let phi = 1.0 + 0.5 * mass / (s * s + core * core).sqrt();
                phi.powi(-4)
            }
            MetricForm::RoundCap { lambda } => (1.0 + (s / lambda).powi(2)).powi(2),
            MetricForm::Tabulated { coeff, .. } => 1.0 / coeff.eval(s),
            MetricForm::Glued { inner, band_lo, band_hi, lambda } => {
                if s < *band_lo {
                    inner.inv_coeff(s)
                } else if s > *band_hi {
                    (1.0 + (s / lambda).powi(2)).powi(2)
                } else {
                    let eta = blend(s, *band_lo);
                    let a = eta / inner.inv_coeff(s) + (1.0 - eta) / (1.0 + (s / lambda).powi(2)).powi(2);
                    1.0 / a
                }
            }
        }
    }

    /// dw/ds.
    pub fn inv_coeff_deriv(&self, s: f64) -> f64 {
        match &self.form {
            MetricForm::Euclidean => 0.0,
            MetricForm::SchwarzschildAreal { mass } => 2.0 * mass / (s * s),
            MetricForm::CoredSchwarzschild { mass, core } => {
                let (phi, dphi, _) = cored_phi(s, *mass, *core);
                -4.0 * dphi * phi.powi(-5)
            }
            MetricForm::RoundCap { lambda } => {
                4.0 * s * (1.0 + (s / lambda).powi(2)) / (lambda * lambda)
            }
            MetricForm::Tabulated { coeff, .. } => {
                let a = coeff.eval(s);
                -coeff.deriv(s) / (a * a)
            }
            MetricForm::Glued { inner, band_lo, band_hi, lambda } => {
                if s < *band_lo {
                    inner.inv_coeff_deriv(s)
                } else if s > *band_hi {
                    4.0 * s * (1.0 + (s / lambda).powi(2)) / (lambda * lambda)
                } else {
                    // w = 1/Abar with Abar = eta A_in + (1-eta) A_cap
                    let eta = blend(s, *band_lo);
                    let deta = blend_deriv(s, *band_lo);
                    let w_in = inner.inv_coeff(s);
                    let a_in = 1.0 / w_in;
                    let da_in = -inner.inv_coeff_deriv(s) / (w_in * w_in);
                    let d = 1.0 + (s / lambda).powi(2);
                    let a_cap = 1.0 / (d * d);
                    let da_cap = -4.0 * s / (lambda * lambda * d.powi(3));
                    let abar = eta * a_in + (1.0 - eta) * a_cap;
                    let dabar = deta * (a_in - a_cap) + eta * da_in + (1.0 - eta) * da_cap;
                    -dabar / (abar * abar)
                }
            }
        }
    }

    /// A(s) = 1/w(s); infinite exactly at a horizon boundary.
    pub fn coeff(&self, s: f64) -> f64 {
        1.0 / self.inv_coeff(s)
    }

    /// sqrt(A) volume weight.
    pub fn sqrt_coeff(&self, s: f64) -> f64 {
        1.0 / self.inv_coeff(s).sqrt()
    }

    /// Area of the centered sphere at s.
    pub fn area(&self, s: f64) -> f64 {
        let r = self.areal_radius(s);
        4.0 * PI * r * r
    }

    /// Mean curvature of the centered sphere with respect to the outward
    /// normal: H = 2 R' sqrt(w) / R.
    pub fn mean_curvature(&self, s: f64) -> f64 {
        2.0 * self.areal_radius_deriv(s) * self.inv_coeff(s).sqrt() / self.areal_radius(s)
    }

    /// Hawking mass of the centered sphere: (R/2)(1 - R'^2 w).
    pub fn hawking_mass(&self, s: f64) -> f64 {
        let rp = self.areal_radius_deriv(s);
        0.5 * self.areal_radius(s) * (1.0 - rp * rp * self.inv_coeff(s))
    }

    /// Coordinate of the volume base point: the center when the areal radius
    /// vanishes at the inner end, otherwise the inner boundary itself.
    pub fn volume_base(&self) -> f64 {
        self.s_min
    }

    /// True when the inner end is a smooth center (R -> 0).
    pub fn has_center(&self) -> bool {
        self.areal_radius(self.s_min) <= 1e-12 * self.areal_radius(self.s_max).max(1.0)
    }

    /// Volume density of the coordinate: dV/ds = 4 pi R^2 sqrt(A).
    pub fn volume_density(&self, s: f64) -> f64 {
        self.volume_weight(s)
    }

    fn volume_weight(&self, s: f64) -> f64 {
        let rad = self.areal_radius(s);
        4.0 * PI * rad * rad / self.inv_coeff(s).sqrt()
    }

    fn volume_table(&self) -> &VolumeTable {
        self.volume_cache.get_or_init(|| {
            let n_cells = 2048usize;
            let geometric = self.s_min > 0.0 && self.s_max / self.s_min > 100.0;
            let knots: Vec<f64> = (0..=n_cells)
                .map(|i| {
                    let t = i as f64 / n_cells as f64;
                    if geometric {
                        self.s_min * (self.s_max / self.s_min).powf(t)
                    } else {
                        self.s_min + (self.s_max - self.s_min) * t
                    }
                })
                .collect();
            let cells: Vec<f64> = knots
                .windows(2)
                .map(|w| integrate(|s| self.volume_weight(s), w[0], w[1], 1e-13, 1e-290).value)
                .collect();
            VolumeTable { knots, cells }
        })
    }

    /// Volume of the coordinate shell [from, to]: 4 pi int R^2 sqrt(A) ds by
    /// cached cell integrals plus short adaptive quadratures at the ends.
    /// Integrable horizon endpoints are fine.
    pub fn volume_between(&self, from: f64, to: f64) -> Result<f64> {
        self.check_domain(from)?;
        self.check_domain(to)?;
        if to <= from {
            return Ok(0.0);
        }
        let table = self.volume_table();
        let cell_of = |x: f64| -> usize {
            match table.knots.binary_search_by(|k| k.total_cmp(&x)) {
                Ok(i) => i.min(table.cells.len() - 1),
                Err(i) => i.saturating_sub(1).min(table.cells.len() - 1),
            }
        };
        let ia = cell_of(from);
        let ib = cell_of(to);
        let quad = |a: f64, b: f64| integrate(|s| self.volume_weight(s), a, b, 1e-12, 1e-290).value;
        if ia == ib {
            return Ok(quad(from, to));
        }
        let mut total = quad(from, table.knots[ia + 1]);
        for cell in &table.cells[ia + 1..ib] {
            total += cell;
        }
        total += quad(table.knots[ib], to);
        Ok(total)
    }

    /// Enclosed volume measured from the volume base point.
    pub fn enclosed_volume(&self, s: f64) -> Result<f64> {
        self.volume_between(self.volume_base(), s)
    }

    /// Invert `enclosed_volume` over [s_min, s_max].
    pub fn coordinate_of_volume(&self, v: f64) -> Result<f64> {
        let total = self.enclosed_volume(self.s_max)?;
        if v < -1e-12 || v > total * (1.0 + 1e-12) {
            return Err(Error::VolumeOutOfRange { v, max: total });
        }
        if v <= 0.0 {
            return Ok(self.volume_base());
        }
        let base = self.volume_base();
        let f = |s: f64| self.volume_between(base, s).unwrap_or(f64::NAN) - v;
        bisect(f, base, self.s_max, 1e-13).ok_or(Error::VolumeOutOfRange { v, max: total })
    }

    /// Resample this metric into tabulated form on [lo, hi] with n samples.
    pub fn tabulate_on(&self, lo: f64, hi: f64, n: usize) -> Result<RadialMetric> {
        self.check_domain(lo)?;
        self.check_domain(hi)?;
        let mut s = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            s.push(x);
            a.push(self.coeff(x));
            r.push(self.areal_radius(x));
        }
        Self::from_samples(s, a, r)
    }

}

/// Blended squared areal radius in the glue band together with its first two
/// derivatives: P = eta R_in^2 + (1 - eta) R_cap^2.
fn glued_radius_sq(inner: &RadialMetric, s: f64, band_lo: f64, lambda: f64) -> (f64, f64, f64) {
    let eta = blend(s, band_lo);
    let deta = blend_deriv(s, band_lo);
    let ddeta = blend_second(s, band_lo);
    let ri = inner.areal_radius(s);
    let dri = inner.areal_radius_deriv(s);
    let ddri = inner.areal_radius_second(s);
    let rs = cap_r(s, lambda);
    let drs = cap_r_deriv(s, lambda);
    let ddrs = cap_r_second(s, lambda);
    let p = eta * ri * ri + (1.0 - eta) * rs * rs;
    let di2 = 2.0 * ri * dri;
    let ds2 = 2.0 * rs * drs;
    let ddi2 = 2.0 * (dri * dri + ri * ddri);
    let dds2 = 2.0 * (drs * drs + rs * ddrs);
    let dp = deta * (ri * ri - rs * rs) + eta * di2 + (1.0 - eta) * ds2;
    let ddp = ddeta * (ri * ri - rs * rs) + 2.0 * deta * (di2 - ds2) + eta * ddi2 + (1.0 - eta) * dds2;
    (p, dp, ddp)
}

fn cored_phi(s: f64, mass: f64, core: f64) -> (f64, f64, f64) {
    let u = s * s + core * core;
    let phi = 1.0 + 0.5 * mass / u.sqrt();
    let dphi = -0.5 * mass * s * u.powf(-1.5);
    let ddphi = -0.5 * mass * u.powf(-2.5) * (core * core - 2.0 * s * s);
    (phi, dphi, ddphi)
}

fn cap_r(s: f64, lambda: f64) -> f64 {
    s / (1.0 + (s / lambda).powi(2))
}
fn cap_r_deriv(s: f64, lambda: f64) -> f64 {
    let x2 = (s / lambda).powi(2);
    (1.0 - x2) / (1.0 + x2).powi(2)
}
fn cap_r_second(s: f64, lambda: f64) -> f64 {
    let x2 = (s / lambda).powi(2);
    (-2.0 * s / (lambda * lambda)) * (3.0 - x2) / (1.0 + x2).powi(3)
}

/// Quintic smoothstep blend: 1 below the band, 0 above, C^2 across.
fn blend(s: f64, band_lo: f64) -> f64 {
    let t = (s - band_lo).clamp(0.0, 1.0);
    1.0 - (6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3))
}
fn blend_deriv(s: f64, band_lo: f64) -> f64 {
    let t = s - band_lo;
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    -(30.0 * t.powi(4) - 60.0 * t.powi(3) + 30.0 * t.powi(2))
}
fn blend_second(s: f64, band_lo: f64) -> f64 {
    let t = s - band_lo;
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    -(120.0 * t.powi(3) - 180.0 * t.powi(2) + 60.0 * t)
}

/// All sphere data at one coordinate.
pub fn sphere_geometry(metric: &RadialMetric, s: f64) -> Result<SphereGeometry> {
    let (lo, hi) = metric.domain();
    if !metric.contains(s) {
        return Err(Error::OutOfDomain { s, lo, hi });
    }
    Ok(SphereGeometry {
        s,
        area: metric.area(s),
        mean_curvature: metric.mean_curvature(s),
        hawking_mass: metric.hawking_mass(s),
        enclosed_volume: metric.enclosed_volume(s)?,
    })
}

/// Scalar curvature of the warped product at an interior coordinate:
/// Scal = 2 (1 - R'^2 w) / R^2 - (4/R) (R'' w + R' w' / 2).
pub fn scalar_curvature(metric: &RadialMetric, s: f64) -> Result<f64> {
    let (lo, hi) = metric.domain();
    if !(s > lo && s < hi) {
        return Err(Error::OutOfDomain { s, lo, hi });
    }
    let r = metric.areal_radius(s);
    let rp = metric.areal_radius_deriv(s);
    let rpp = metric.areal_radius_second(s);
    let w = metric.inv_coeff(s);
    let wp = metric.inv_coeff_deriv(s);
    Ok(2.0 * (1.0 - rp * rp * w) / (r * r) - (4.0 / r) * (rpp * w + 0.5 * rp * wp))
}

/// ADM mass as the large-sphere limit of the Hawking mass, accelerated by
/// Richardson extrapolation on a radius-doubling sequence.
pub fn adm_mass(metric: &RadialMetric) -> Result<f64> {
    let (lo, hi) = metric.domain();
    let hi_eff = lo + 0.95 * (hi - lo);
    let report = af_decay_check(metric, hi_eff / 32.0)?;
    if !report.passes {
        return Err(Error::NotAsymptoticallyFlat(format!(
            "decay constant grows outward (witnessed C = {:.3e})",
            report.witnessed_constant
        )));
    }
    let k = 8usize;
    let masses: Vec<f64> = (0..=k)
        .map(|j| metric.hawking_mass(hi_eff / 2f64.powi((k - j) as i32)))
        .collect();
    let (limit, spread) = richardson(&masses);
    if spread > 1e-7 * (1.0 + limit.abs()) {
        return Err(Error::ExtrapolationDiverged { spread });
    }
    Ok(limit)
}

/// Sample the decay conditions of asymptotic flatness on a geometric grid
/// in [r_min, s_max). The perturbation components in the radial class are
/// A - 1 and (R/s)^2 - 1.
pub fn af_decay_check(metric: &RadialMetric, r_min: f64) -> Result<AFDecayReport> {
    let (lo, hi) = metric.domain();
    if r_min <= lo.max(0.0) || r_min >= hi {
        return Err(Error::OutOfDomain { s: r_min, lo, hi });
    }
    if hi < 4.0 * r_min {
        return Err(Error::DomainTooShort { r_min, s_max: hi });
    }
    let r_hi = 0.98 * hi;
    let count = 33usize;
    let ratio = (r_hi / r_min).powf(1.0 / (count - 1) as f64);

    let sigma_rr = |s: f64| 1.0 / metric.inv_coeff(s) - 1.0;
    let sigma_tt = |s: f64| (metric.areal_radius(s) / s).powi(2) - 1.0;
    let dsigma_rr = |s: f64| {
        let w = metric.inv_coeff(s);
        -metric.inv_coeff_deriv(s) / (w * w)
    };
    let dsigma_tt = |s: f64| {
        let r = metric.areal_radius(s);
        let rp = metric.areal_radius_deriv(s);
        2.0 * r * (rp * s - r) / (s * s * s)
    };

    let mut samples = Vec::with_capacity(count);
    let mut qs = Vec::with_capacity(count);
    let mut r = r_min;
    for _ in 0..count {
        let sig = sigma_rr(r).abs().max(sigma_tt(r).abs());
        let dsig = dsigma_rr(r).abs().max(dsigma_tt(r).abs());
        // second derivative by centered differences of the analytic first derivative
        let h = 1e-4 * r;
        let dd_rr = (dsigma_rr(r + h) - dsigma_rr(r - h)) / (2.0 * h);
        let dd_tt = (dsigma_tt(r + h) - dsigma_tt(r - h)) / (2.0 * h);
        let ddsig = dd_rr.abs().max(dd_tt.abs());
        samples.push((r, sig, r * dsig, r * r * ddsig));
        qs.push(r * (sig + r * dsig + r * r * ddsig));
        r *= ratio;
    }

    let witnessed_constant = qs.iter().cloned().fold(0.0f64, f64::max);
    let half = count / 2;
    let inner_max = qs[..half].iter().cloned().fold(0.0f64, f64::max);
    let outer_max = qs[half..].iter().cloned().fold(0.0f64, f64::max);
    let passes = witnessed_constant.is_finite()
        && outer_max <= 1.5 * inner_max + 1e-9 * (1.0 + inner_max);

    Ok(AFDecayReport { passes, witnessed_constant, samples })
}

/// Glue a round spherical cap onto the inner metric across the unit band
/// [transition_radius + 5, transition_radius + 6].
pub fn build_glued_metric(spec: &GluedMetricSpec) -> Result<RadialMetric> {
    let band_lo = spec.transition_radius + 5.0;
    let band_hi = spec.transition_radius + 6.0;
    let (lo, hi) = spec.inner_metric.domain();
    if !(spec.cap_scale > 0.0) {
        return Err(Error::NonPositiveParameter { name: "cap_scale", value: spec.cap_scale });
    }
    if band_hi > hi || band_lo < lo {
        return Err(Error::TransitionOutsideDomain { lo: band_lo, hi: band_hi });
    }
    let s_max = (50.0 * spec.cap_scale).max(2.0 * band_hi);
    Ok(new_metric(
        MetricForm::Glued {
            inner: Box::new(spec.inner_metric.clone()),
            band_lo,
            band_hi,
            lambda: spec.cap_scale,
        },
        lo,
        s_max,
    ))
}

/// Serializable metric configuration: exactly one of `preset` or `tabulated`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabulated: Option<TabulatedConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedConfig {
    pub s: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
}

impl MetricConfig {
    pub fn preset(name: &str, params: &[(&str, f64)]) -> Self {
        MetricConfig {
            preset: Some(name.to_string()),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            tabulated: None,
        }
    }

    pub fn build(&self) -> Result<RadialMetric> {
        match (&self.preset, &self.tabulated) {
            (Some(_), Some(_)) | (None, None) => Err(Error::InvalidConfig {
                field: "metric".into(),
                message: "exactly one of `preset` or `tabulated` must be given".into(),
            }),
            (Some(name), None) => make_preset(name, &self.params),
            (None, Some(tab)) => {
                if !self.params.is_empty() {
                    return Err(Error::InvalidConfig {
                        field: "params".into(),
                        message: "params are only valid together with a preset".into(),
                    });
                }
                RadialMetric::from_samples(tab.s.clone(), tab.a.clone(), tab.r.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn euclid() -> RadialMetric {
        make_preset("euclidean", &BTreeMap::new()).unwrap()
    }
    fn schwarzschild(m: f64) -> RadialMetric {
        make_preset("schwarzschild-areal", &BTreeMap::from([("m".to_string(), m)])).unwrap()
    }
    fn cored(m: f64, b: f64) -> RadialMetric {
        make_preset(
            "cored-schwarzschild",
            &BTreeMap::from([("m".to_string(), m), ("b".to_string(), b)]),
        )
        .unwrap()
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(
            make_preset("nonsense", &BTreeMap::new()),
            Err(Error::UnknownPreset(_))
        ));
        assert!(make_preset(
            "schwarzschild-areal",
            &BTreeMap::from([("m".to_string(), -1.0)])
        )
        .is_err());
        assert!(make_preset(
            "schwarzschild-areal",
            &BTreeMap::from([("mass".to_string(), 1.0)])
        )
        .is_err());
    }

    /// Analytic derivative channels agree with central differences.
    #[test]
    fn derivative_channels_match_finite_differences() {
        let metrics: Vec<(RadialMetric, Vec<f64>)> = vec![
            (euclid(), vec![0.5, 2.0, 37.0]),
            (schwarzschild(1.0), vec![2.5, 4.0, 80.0]),
            (cored(1.0, 1.0), vec![0.3, 1.7, 25.0]),
            (
                make_preset("round-3-sphere-cap", &BTreeMap::from([("lambda".to_string(), 10.0)]))
                    .unwrap(),
                vec![1.0, 9.0, 40.0],
            ),
        ];
        for (metric, pts) in &metrics {
            for &s in pts {
                let h = 1e-5 * s.max(1.0);
                let fd_rp = (metric.areal_radius(s + h) - metric.areal_radius(s - h)) / (2.0 * h);
                let fd_rpp =
                    (metric.areal_radius_deriv(s + h) - metric.areal_radius_deriv(s - h)) / (2.0 * h);
                let fd_wp = (metric.inv_coeff(s + h) - metric.inv_coeff(s - h)) / (2.0 * h);
                assert!(
                    (metric.areal_radius_deriv(s) - fd_rp).abs() < 1e-7 * (1.0 + fd_rp.abs()),
                    "R' mismatch at {s}"
                );
                assert!(
                    (metric.areal_radius_second(s) - fd_rpp).abs() < 1e-6 * (1.0 + fd_rpp.abs()),
                    "R'' mismatch at {s}"
                );
                assert!(
                    (metric.inv_coeff_deriv(s) - fd_wp).abs() < 1e-6 * (1.0 + fd_wp.abs()),
                    "w' mismatch at {s}"
                );
            }
        }
    }

    #[test]
    fn sphere_geometry_flat() {
        let g = sphere_geometry(&euclid(), 2.0).unwrap();
        assert!((g.area - 16.0 * PI).abs() < 1e-12);
        assert!((g.mean_curvature - 1.0).abs() < 1e-13);
        assert!(g.hawking_mass.abs() < 1e-13);
        assert!((g.enclosed_volume - 4.0 / 3.0 * PI * 8.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_geometry_schwarzschild_horizon_and_exterior() {
        let m = schwarzschild(1.0);
        let at_horizon = sphere_geometry(&m, 2.0).unwrap();
        assert!((at_horizon.area - 16.0 * PI).abs() < 1e-10);
        assert!(at_horizon.mean_curvature.abs() < 1e-13);
        assert!((at_horizon.hawking_mass - 1.0).abs() < 1e-13);
        assert!(at_horizon.enclosed_volume.abs() < 1e-12);

        let g = sphere_geometry(&m, 4.0).unwrap();
        assert!((g.mean_curvature - 0.353_553_390_593_273_76).abs() < 1e-12);
        assert!((g.hawking_mass - 1.0).abs() < 1e-13);
    }

    /// The (R/2)(1 - R'^2 w) form equals the literal Hawking mass formula
    /// sqrt(area)/(16 pi)^{3/2} * (16 pi - H^2 area).
    #[test]
    fn hawking_mass_formula_equivalence() {
        let metrics = [euclid(), schwarzschild(0.7), cored(1.3, 0.8)];
        for metric in &metrics {
            let (lo, hi) = metric.domain();
            for i in 1..40 {
                let s = lo + (hi.min(50.0) - lo) * i as f64 / 40.0;
                if s <= lo {
                    continue;
                }
                let area = metric.area(s);
                let h = metric.mean_curvature(s);
                let literal = area.sqrt() / (16.0 * PI).powf(1.5) * (16.0 * PI - h * h * area);
                let fast = metric.hawking_mass(s);
                assert!(
                    (literal - fast).abs() <= 1e-11 * (1.0 + fast.abs()),
                    "mismatch at s={s}: {literal} vs {fast}"
                );
            }
        }
    }

    #[test]
    fn schwarzschild_slab_volume_matches_reference() {
        // int_2^4 rho^2 / sqrt(1 - 2/rho) drho = 35.990970828096838 (mpmath),
        // times the 4 pi angular factor.
        let m = schwarzschild(1.0);
        let v = m.volume_between(2.0, 4.0).unwrap();
        let expected = 4.0 * PI * 35.990_970_828_096_838;
        assert!(
            (v - expected).abs() < 1e-6 * expected,
            "volume {v} vs {expected}"
        );
    }

    #[test]
    fn scalar_curvature_oracles() {
        // flat
        assert!(scalar_curvature(&euclid(), 3.7).unwrap().abs() < 1e-12);
        // vacuum
        for s in [2.5, 3.0, 10.0, 500.0] {
            assert!(
                scalar_curvature(&schwarzschild(1.0), s).unwrap().abs() < 1e-8,
                "nonzero vacuum curvature at {s}"
            );
        }
        // cored center value 12 m / (b^3 phi(0)^5) = 12/1.5^5; probing at
        // r = 1e-3 keeps the 1 - R'^2 w cancellation above the fp noise
        // while the limit deviation is O(r^2) ~ 5e-6
        let c = cored(1.0, 1.0);
        let scal0 = scalar_curvature(&c, 1e-3).unwrap();
        assert!(
            (scal0 - 1.580_246_913_580_246_9).abs() < 2e-5,
            "center curvature {scal0}"
        );
        // positive everywhere sampled
        for i in 1..=60 {
            let s = 1e-3 + (i as f64) * 0.8;
            assert!(scalar_curvature(&c, s).unwrap() > 0.0, "Scal <= 0 at {s}");
        }
    }

    /// Independent oracle: for a conformally flat metric phi^4 delta,
    /// Scal = -8 phi^-5 Laplacian(phi) with the flat Laplacian; check the
    /// warped-product formula against a finite-difference Laplacian.
    #[test]
    fn cored_curvature_vs_fd_laplacian() {
        let (m, b) = (1.0, 1.0);
        let metric = cored(m, b);
        let phi = |r: f64| 1.0 + 0.5 * m / (r * r + b * b).sqrt();
        for &r in &[0.4f64, 1.0, 2.3, 6.0] {
            let h = 1e-4 * r.max(0.5);
            let lap = (phi(r + h) - 2.0 * phi(r) + phi(r - h)) / (h * h)
                + (phi(r + h) - phi(r - h)) / (h * r);
            let expected = -8.0 * phi(r).powi(-5) * lap;
            let got = scalar_curvature(&metric, r).unwrap();
            assert!(
                (got - expected).abs() < 1e-5 * (1.0 + expected.abs()),
                "at r={r}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn adm_masses() {
        assert!(adm_mass(&euclid()).unwrap().abs() < 1e-12);
        for m in [0.5, 1.0, 2.0] {
            let got = adm_mass(&schwarzschild(m)).unwrap();
            assert!((got - m).abs() < 1e-8, "mass {m}: got {got}");
        }
        let got = adm_mass(&cored(1.0, 1.0)).unwrap();
        assert!((got - 1.0).abs() < 1e-6, "cored mass: {got}");
    }

    #[test]
    fn af_decay_verdicts() {
        let e = af_decay_check(&euclid(), 1.0).unwrap();
        assert!(e.passes);
        assert!(e.witnessed_constant < 1e-10);

        let s = af_decay_check(&schwarzschild(1.0), 4.0).unwrap();
        assert!(s.passes);
        assert!(s.witnessed_constant.is_finite() && s.witnessed_constant > 0.1);

        let cap = make_preset(
            "round-3-sphere-cap",
            &BTreeMap::from([("lambda".to_string(), 10.0)]),
        )
        .unwrap();
        let c = af_decay_check(&cap, 1.0).unwrap();
        assert!(!c.passes, "compact cap must fail the decay check");

        assert!(matches!(
            af_decay_check(&euclid(), 0.5e6),
            Err(Error::DomainTooShort { .. })
        ));
    }

    #[test]
    fn glued_metric_curvature() {
        let spec = GluedMetricSpec {
            inner_metric: euclid(),
            transition_radius: 4.0,
            cap_scale: 10.0,
        };
        let g = build_glued_metric(&spec).unwrap();
        // inside the band: flat
        assert!(scalar_curvature(&g, 8.9).unwrap().abs() < 1e-10);
        // outside the band: round sphere of radius lambda/2, Scal = 24/lambda^2
        for s in [10.5, 15.0, 40.0, 200.0] {
            let scal = scalar_curvature(&g, s).unwrap();
            assert!(
                (scal - 0.24).abs() < 1e-6 * 0.24,
                "cap curvature at {s}: {scal}"
            );
        }
        // large lambda: cap flattens
        let flat_spec = GluedMetricSpec {
            inner_metric: euclid(),
            transition_radius: 4.0,
            cap_scale: 1e6,
        };
        let gf = build_glued_metric(&flat_spec).unwrap();
        assert!(scalar_curvature(&gf, 20.0).unwrap().abs() < 1e-10);

        // schwarzschild inner agrees exactly below the band
        let sspec = GluedMetricSpec {
            inner_metric: schwarzschild(1.0),
            transition_radius: 10.0,
            cap_scale: 100.0,
        };
        let gs = build_glued_metric(&sspec).unwrap();
        let reference = schwarzschild(1.0);
        for s in [3.0, 9.0, 14.9] {
            assert_eq!(gs.areal_radius(s), reference.areal_radius(s));
            assert_eq!(gs.inv_coeff(s), reference.inv_coeff(s));
        }
        // glued result is smooth enough for curvature across the band
        for s in [14.5, 15.3, 15.8, 16.2] {
            assert!(scalar_curvature(&gs, s).unwrap().is_finite());
        }
    }

    #[test]
    fn neck_preset_shape() {
        let neck = make_preset("neck", &BTreeMap::new()).unwrap();
        let (lo, hi) = neck.domain();
        assert!(lo > 0.0 && hi > lo);
        // one interior dip: R' changes sign + to - to +
        let rp = |s: f64| neck.areal_radius_deriv(s);
        assert!(rp(1.0) > 0.0);
        assert!(rp(3.3) < 0.0);
        assert!(rp(6.0) > 0.0);
    }

    /// A preset round-tripped through 4096-sample tabulation keeps its
    /// derivative channels to 1e-6 relative on a smooth window.
    #[test]
    fn tabulation_round_trip_derivatives() {
        let cases = vec![
            (euclid(), 0.5, 4.0),
            (schwarzschild(1.0), 4.0, 8.0),
            (cored(1.0, 1.0), 1.0, 5.0),
        ];
        for (metric, lo, hi) in cases {
            let tab = metric.tabulate_on(lo, hi, 4096).unwrap();
            for i in 1..32 {
                let s = lo + (hi - lo) * i as f64 / 32.0;
                let dr = (tab.areal_radius_deriv(s) - metric.areal_radius_deriv(s)).abs();
                let dw = (tab.inv_coeff_deriv(s) - metric.inv_coeff_deriv(s)).abs();
                assert!(
                    dr <= 1e-6 * metric.areal_radius_deriv(s).abs().max(1e-3),
                    "R' round-trip error {dr} at s={s}"
                );
                assert!(
                    dw <= 1e-6 * metric.inv_coeff_deriv(s).abs().max(1e-3),
                    "w' round-trip error {dw} at s={s}"
                );
            }
        }
    }

    #[test]
    fn metric_config_exactly_one_source() {
        let bad: MetricConfig = serde_json::from_str(r#"{}"#).unwrap();
        assert!(bad.build().is_err());
        let ok: MetricConfig =
            serde_json::from_str(r#"{"preset":"euclidean","params":{}}"#).unwrap();
        assert!(ok.build().is_ok());
        assert!(serde_json::from_str::<MetricConfig>(r#"{"presett":"euclidean"}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Hawking mass cap: m_H <= sqrt(area/16 pi), equality iff H = 0.
        #[test]
        fn hawking_cap_holds(m in 0.2f64..3.0, b in 0.3f64..2.0, t in 0.02f64..1.0) {
            let metric = cored(m, b);
            let s = t * 40.0;
            let g = sphere_geometry(&metric, s).unwrap();
            let cap = (g.area / (16.0 * PI)).sqrt();
            prop_assert!(g.hawking_mass <= cap + 1e-12 * (1.0 + cap));
            if g.mean_curvature.abs() > 1e-6 {
                prop_assert!(g.hawking_mass < cap);
            }
        }

        /// Enclosed volume is strictly increasing in s.
        #[test]
        fn volume_strictly_increasing(m in 0.2f64..2.0, a in 0.1f64..1.0) {
            let metric = schwarzschild(m);
            let s1 = 2.0 * m + a;
            let s2 = s1 + 0.5;
            let v1 = metric.enclosed_volume(s1).unwrap();
            let v2 = metric.enclosed_volume(s2).unwrap();
            prop_assert!(v2 > v1);
        }
    }
}
