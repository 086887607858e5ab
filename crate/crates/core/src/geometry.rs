//! Array layouts, per-element delays, effective aperture and subspace
//! dimension estimates.
//!
//! Angles: azimuth `phi` is measured in the x-y plane from the x-axis and
//! elevation `theta` from that plane, so the unit normal of the incoming
//! wavefront is `[cos(phi)cos(theta), sin(phi)cos(theta), sin(theta)]`.
//! Linear arrays lie on the x-axis, which makes the azimuth the angle from
//! the array axis: `phi = pi/2` is broadside and `phi = 0` is endfire.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Ula,
    Upa,
    Circular,
    RandomLinear,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub kind: ArrayKind,
    pub carrier_hz: f64,
    pub elements: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionOfArrival {
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
}

/// Delays of each element relative to the array centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayProfile {
    pub delays_s: Vec<f64>,
    /// Delays divided by the reference lag (see [`crate::slepian`]).
    pub normalized_lags: Vec<f64>,
    /// Reference lag in seconds.
    pub tau_ref_s: f64,
}

impl DirectionOfArrival {
    pub fn new(azimuth_rad: f64, elevation_rad: f64) -> Self {
        Self { azimuth_rad, elevation_rad }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// In-plane arrival at the given azimuth.
    pub fn azimuth(azimuth_rad: f64) -> Self {
        Self::new(azimuth_rad, 0.0)
    }

    pub fn unit_normal(&self) -> [f64; 3] {
        let (sp, cp) = self.azimuth_rad.sin_cos();
        let (st, ct) = self.elevation_rad.sin_cos();
        [cp * ct, sp * ct, st]
    }

    pub fn negated(&self) -> [f64; 3] {
        let u = self.unit_normal();
        [-u[0], -u[1], -u[2]]
    }
}

/// Half-wavelength spacing `c / (2 f_c)`.
pub fn half_wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / (2.0 * carrier_hz)
}

fn check_carrier(carrier_hz: f64) -> Result<()> {
    if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("carrier must be positive, got {carrier_hz}")));
    }
    Ok(())
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `ceil(x)` that ignores floating-point excess below `1e-9` relative, so
/// that products which are exact integers are not pushed up by one.
pub(crate) fn robust_ceil(x: f64) -> usize {
    let slack = 1e-9 * x.abs().max(1.0);
    (x - slack).ceil().max(0.0) as usize
}

pub fn build_ula(m: usize, carrier_hz: f64) -> Result<ArrayGeometry> {
    if m == 0 {
        return Err(Error::InvalidArgument("ULA needs at least one element".into()));
    }
    check_carrier(carrier_hz)?;
    let d = half_wavelength(carrier_hz);
    let center = (m as f64 - 1.0) / 2.0;
    let elements = (0..m).map(|i| [(i as f64 - center) * d, 0.0, 0.0]).collect();
    Ok(ArrayGeometry { kind: ArrayKind::Ula, carrier_hz, elements })
}

/// `m x n` planar grid in the x-y plane; `m` indexes x and `n` indexes y.
pub fn build_upa(m: usize, n: usize, carrier_hz: f64) -> Result<ArrayGeometry> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("UPA dimensions must be positive".into()));
    }
    check_carrier(carrier_hz)?;
    let d = half_wavelength(carrier_hz);
    let (cx, cy) = ((m as f64 - 1.0) / 2.0, (n as f64 - 1.0) / 2.0);
    let mut elements = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            elements.push([(i as f64 - cx) * d, (j as f64 - cy) * d, 0.0]);
        }
    }
    Ok(ArrayGeometry { kind: ArrayKind::Upa, carrier_hz, elements })
}

/// `m` elements on a circle of circumference `m * c / (2 f_c)` in the z=0 plane.
pub fn build_circular(m: usize, carrier_hz: f64) -> Result<ArrayGeometry> {
    if m < 2 {
        return Err(Error::InvalidArgument("circular array needs at least two elements".into()));
    }
    check_carrier(carrier_hz)?;
    let radius = m as f64 * half_wavelength(carrier_hz) / (2.0 * std::f64::consts::PI);
    let elements = (0..m)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            [radius * a.cos(), radius * a.sin(), 0.0]
        })
        .collect();
    Ok(ArrayGeometry { kind: ArrayKind::Circular, carrier_hz, elements })
}

/// `m` i.i.d. uniform positions on `[0, m * spacing_d]` along the x-axis,
/// sorted ascending. The carrier is the one for which `spacing_d` is half a
/// wavelength.
pub fn build_random_linear(m: usize, spacing_d: f64, seed: u64) -> Result<ArrayGeometry> {
    if m == 0 {
        return Err(Error::InvalidArgument("random array needs at least one element".into()));
    }
    if !(spacing_d.is_finite() && spacing_d > 0.0) {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing_d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = m as f64 * spacing_d;
    let mut xs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * span).collect();
    xs.sort_by(f64::total_cmp);
    Ok(ArrayGeometry {
        kind: ArrayKind::RandomLinear,
        carrier_hz: SPEED_OF_LIGHT / (2.0 * spacing_d),
        elements: xs.into_iter().map(|x| [x, 0.0, 0.0]).collect(),
    })
}

impl ArrayGeometry {
    /// Builds a geometry from explicit positions and checks the invariants
    /// implied by `kind`.
    pub fn new(kind: ArrayKind, carrier_hz: f64, elements: Vec<[f64; 3]>) -> Result<Self> {
        let g = Self { kind, carrier_hz, elements };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        check_carrier(self.carrier_hz)?;
        if self.elements.is_empty() {
            return Err(Error::InvalidArgument("geometry has no elements".into()));
        }
        if self.elements.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("element positions must be finite".into()));
        }
        match self.kind {
            ArrayKind::Ula => self.check_ula(),
            ArrayKind::Circular => self.check_circular(),
            _ => Ok(()),
        }
    }

    fn check_ula(&self) -> Result<()> {
        let d = half_wavelength(self.carrier_hz);
        let p = &self.elements;
        if p.len() < 2 {
            return Ok(());
        }
        let dir = sub(&p[1], &p[0]);
        let len = dot(&dir, &dir).sqrt();
        let unit = [dir[0] / len, dir[1] / len, dir[2] / len];
        for (i, w) in p.windows(2).enumerate() {
            let step = sub(&w[1], &w[0]);
            let along = dot(&step, &unit);
            let off = [step[0] - along * unit[0], step[1] - along * unit[1], step[2] - along * unit[2]];
            if (along - d).abs() > 1e-12 * d || dot(&off, &off).sqrt() > 1e-12 * d {
                return Err(Error::InvalidArgument(format!(
                    "ULA elements {i} and {} are not collinear at spacing c/(2 f_c)",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn check_circular(&self) -> Result<()> {
        if self.elements.len() < 2 {
            return Err(Error::InvalidArgument("circular array needs at least two elements".into()));
        }
        let c = self.centroid();
        let radii: Vec<f64> = self.elements.iter().map(|p| dot(&sub(p, &c), &sub(p, &c)).sqrt()).collect();
        let r0 = radii[0];
        if radii.iter().any(|r| (r - r0).abs() > 1e-9 * r0) {
            return Err(Error::InvalidArgument("circular elements are not equidistant from the centroid".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.elements.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.elements {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }

    /// Projections `(z_m - centroid) . u` in meters.
    pub fn projections(&self, u: &[f64; 3]) -> Vec<f64> {
        let c = self.centroid();
        self.elements.iter().map(|p| dot(&sub(p, &c), u)).collect()
    }

    /// Same geometry shifted rigidly by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let elements = self.elements.iter().map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]]).collect();
        Self { kind: self.kind, carrier_hz: self.carrier_hz, elements }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `tau_m = (z_m - centroid) . u / c`, together with normalized lags.
pub fn delays(g: &ArrayGeometry, doa: &DirectionOfArrival) -> DelayProfile {
    let u = doa.unit_normal();
    let delays_s: Vec<f64> = g.projections(&u).into_iter().map(|p| p / SPEED_OF_LIGHT).collect();
    let tau_ref_s = reference_lag(&delays_s, g.carrier_hz);
    let normalized_lags = delays_s.iter().map(|t| t / tau_ref_s).collect();
    DelayProfile { delays_s, normalized_lags, tau_ref_s }
}

/// Mean projected element spacing in seconds, `(max tau - min tau) / (M - 1)`.
///
/// With this unit a half-wavelength ULA has integer lags at every angle and
/// the generalized prolate matrix reduces to the classical one with
/// `W = (Omega / 2 f_c) |cos theta|`. Zero-depth arrays fall back to half a
/// carrier period.
pub fn reference_lag(delays_s: &[f64], carrier_hz: f64) -> f64 {
    let (lo, hi) = min_max(delays_s);
    let spread = hi - lo;
    let fallback = 1.0 / (2.0 * carrier_hz);
    if delays_s.len() < 2 || spread <= 1e-12 * fallback {
        fallback
    } else {
        spread / (delays_s.len() - 1) as f64
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// `A = max_m z_m . u - min_m z_m . u` in meters.
pub fn effective_aperture(g: &ArrayGeometry, doa: &DirectionOfArrival) -> f64 {
    aperture_along(g, &doa.unit_normal())
}

pub fn aperture_along(g: &ArrayGeometry, u: &[f64; 3]) -> f64 {
    let (lo, hi) = min_max(&g.projections(u));
    (hi - lo).abs()
}

/// `max(ceil(2 Omega A / c), 1)`.
pub fn subspace_dimension(g: &ArrayGeometry, doa: &DirectionOfArrival, omega_hz: f64) -> usize {
    dimension_from_aperture(effective_aperture(g, doa), omega_hz)
}

pub fn dimension_from_aperture(aperture_m: f64, omega_hz: f64) -> usize {
    robust_ceil(2.0 * omega_hz * aperture_m / SPEED_OF_LIGHT).max(1)
}

/// Closed form for an `m`-element half-wavelength ULA,
/// `max(ceil((Omega / f_c) m |cos theta|), 1)` with `theta` the angle from
/// the array axis (the azimuth for in-plane arrival).
pub fn ula_dimension(m: usize, carrier_hz: f64, omega_hz: f64, doa: &DirectionOfArrival) -> usize {
    let cos_axis = doa.unit_normal()[0].abs();
    robust_ceil(omega_hz / carrier_hz * m as f64 * cos_axis).max(1)
}

/// Closed form for an `m x n` UPA,
/// `max(ceil((Omega / f_c) sqrt(m^2 + n^2) |cos theta|), 1)` with `theta`
/// the elevation.
pub fn upa_dimension(m: usize, n: usize, carrier_hz: f64, omega_hz: f64, doa: &DirectionOfArrival) -> usize {
    let diag = ((m * m + n * n) as f64).sqrt();
    robust_ceil(omega_hz / carrier_hz * diag * doa.elevation_rad.cos().abs()).max(1)
}

/// Dimension of the separable (Kronecker) 2-D Slepian representation of an
/// `m x n` UPA.
pub fn separable_dimension(m: usize, n: usize, carrier_hz: f64, omega_hz: f64, doa: &DirectionOfArrival) -> usize {
    let r = omega_hz / carrier_hz;
    let cp = doa.azimuth_rad.cos();
    let (st, ct) = doa.elevation_rad.sin_cos();
    let a = robust_ceil(n as f64 * r * (cp * ct).abs()).max(1);
    let b = robust_ceil(m as f64 * r * (cp * st).abs()).max(1);
    a * b
}
