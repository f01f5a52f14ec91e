//! Synthetic skin: scenario kinematics, a deterministic deformation model and
//! camera-frame rendering of the deformed colour pattern.
//!
//! The deformation model stands in for elastomer physics. A contact field is
//! the sum of
//!
//! * a uniform shear along the image x axis, `k_s · sin θ_g`;
//! * a radial spread `k_r · w(p) · (p − p_cop)` around the centre of pressure,
//!   with a Gaussian weight `w` of radius `σ_r`. The centre of pressure moves
//!   along x with the gravity lever of the leg,
//!   `x_cop = clamp(κ · L_com · sin(θ_g + θ_leg − 90°), ±footprint_halfwidth)`;
//! * i.i.d. Gaussian pixel noise.
//!
//! Without contact only the noise remains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::optflow::{DisplacementField, PatternImage};
use crate::{deg2rad, Error, Result, GRAVITY};

/// Ground-truth scenario kinematics. All angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioState {
    /// Ground plate tilt, positive backward.
    pub theta_g: f64,
    /// Motor angle between foot plate and leg.
    pub theta_leg: f64,
    /// Foot (camera frame) tilt.
    pub theta_f: f64,
    pub contact: bool,
    pub t: f64,
}

impl ScenarioState {
    /// A contact state with `theta_f` filled in from [`foot_tilt`].
    pub fn in_contact(theta_g: f64, theta_leg: f64, geom: &LegGeometry, params: &SkinParams) -> Self {
        Self {
            theta_g,
            theta_leg,
            theta_f: foot_tilt(theta_g, theta_leg, geom, params),
            contact: true,
            t: 0.0,
        }
    }
}

/// Leg dimensions. The 22 cm length and 40 g top mass are the physical
/// prototype's; the shaft offset and COM distance are assumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LegGeometry {
    /// Leg length `L`, m.
    pub leg_length: f64,
    /// Motor shaft offset `l`, m.
    pub shaft_offset: f64,
    /// COM distance along the leg, m.
    pub com_distance: f64,
    /// kg.
    pub mass: f64,
}

impl Default for LegGeometry {
    fn default() -> Self {
        Self {
            leg_length: 0.22,
            shaft_offset: 0.03,
            com_distance: 0.11,
            mass: 0.04,
        }
    }
}

impl LegGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.shaft_offset > 0.0 && self.shaft_offset < self.leg_length) {
            return Err(Error::InvalidArgument(format!(
                "leg geometry needs 0 < l < L (l = {}, L = {})",
                self.shaft_offset, self.leg_length
            )));
        }
        if !(self.mass > 0.0) {
            return Err(Error::InvalidArgument("leg mass must be positive".into()));
        }
        Ok(())
    }

    /// Gravity moment of the leg COM about the ankle for a given absolute leg
    /// inclination from vertical, N·m.
    pub fn gravity_moment(&self, inclination_deg: f64) -> f64 {
        self.mass * GRAVITY * self.com_distance * deg2rad(inclination_deg).sin()
    }
}

/// Deformation model parameters. Lengths are in pixels of the rendered
/// raster; defaults are for a 640×480 camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkinParams {
    /// Uniform shear gain, px per unit `sin θ_g`.
    pub shear_gain: f64,
    /// Radial spread gain (dimensionless, px per px from the COP).
    pub spread_gain: f64,
    /// Gaussian radius of the spread, px.
    pub spread_radius: f64,
    /// Extra foot tilt per unit of gravity moment, deg/(N·m). A guess: the
    /// prototype's foot-vs-ground discrepancy was never quantified.
    pub compliance: f64,
    /// Per-pixel noise standard deviation, px.
    pub noise_sigma: f64,
    /// COP travel limit from the pattern centre, px.
    pub footprint_halfwidth: f64,
    /// COP displacement per metre of COM lever, px/m.
    pub cop_gain: f64,
}

impl Default for SkinParams {
    fn default() -> Self {
        Self {
            shear_gain: 12.0,
            spread_gain: 0.06,
            spread_radius: 100.0,
            compliance: 60.0,
            noise_sigma: 0.05,
            footprint_halfwidth: 200.0,
            cop_gain: 1600.0,
        }
    }
}

impl SkinParams {
    /// Defaults with spatial extents rescaled for a raster `width` pixels wide.
    /// Displacement gains are left alone.
    pub fn for_raster_width(width: usize) -> Self {
        Self::default().scaled(width as f64 / 640.0)
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.spread_radius *= factor;
        self.footprint_halfwidth *= factor;
        self.cop_gain *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let gains = [
            self.shear_gain,
            self.spread_gain,
            self.compliance,
            self.noise_sigma,
            self.footprint_halfwidth,
            self.cop_gain,
        ];
        if gains.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidArgument("skin gains must be >= 0".into()));
        }
        if !(self.spread_radius > 0.0) {
            return Err(Error::InvalidArgument("spread_radius must be > 0".into()));
        }
        Ok(())
    }

    /// Default contact-detection threshold, three noise sigmas.
    pub fn contact_threshold(&self) -> f64 {
        3.0 * self.noise_sigma
    }
}

/// Foot tilt under load: `θ_f = θ_g + k_f · M` with `M` the gravity moment of
/// the leg COM about the ankle at inclination `θ_g + θ_leg − 90°`.
pub fn foot_tilt(theta_g: f64, theta_leg: f64, geom: &LegGeometry, params: &SkinParams) -> f64 {
    theta_g + params.compliance * geom.gravity_moment(theta_g + theta_leg - 90.0)
}

/// Centre-of-pressure offset from the pattern centre along x, px.
pub fn cop_offset(theta_g: f64, theta_leg: f64, geom: &LegGeometry, params: &SkinParams) -> f64 {
    let lever = geom.com_distance * deg2rad(theta_g + theta_leg - 90.0).sin();
    (params.cop_gain * lever).clamp(-params.footprint_halfwidth, params.footprint_halfwidth)
}

/// Synthetic skin displacement for `state`, deterministic in `(state, seed)`.
pub fn deformation_field(
    state: &ScenarioState,
    geom: &LegGeometry,
    params: &SkinParams,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<DisplacementField> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "deformation raster {width}x{height} has a zero dimension"
        )));
    }
    let mut field = if state.contact {
        let shear = params.shear_gain * deg2rad(state.theta_g).sin();
        let cx = (width as f64 - 1.0) / 2.0 + cop_offset(state.theta_g, state.theta_leg, geom, params);
        let cy = (height as f64 - 1.0) / 2.0;
        let inv2s2 = 1.0 / (2.0 * params.spread_radius * params.spread_radius);
        DisplacementField::from_fn(width, height, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let wgt = params.spread_gain * (-(dx * dx + dy * dy) * inv2s2).exp();
            [(shear + wgt * dx) as f32, (wgt * dy) as f32]
        })
    } else {
        DisplacementField::zeros(width, height)
    };
    if params.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, params.noise_sigma).expect("sigma validated");
        for uv in field.vectors_mut() {
            uv[0] += normal.sample(&mut rng) as f32;
            uv[1] += normal.sample(&mut rng) as f32;
        }
    }
    Ok(field)
}

/// Camera view of the deformed pattern: `out(x) = pattern(x − u(x))`, bilinear,
/// clamped to the edge, rounded to 8 bits.
pub fn render_frame(pattern: &PatternImage, field: &DisplacementField) -> Result<PatternImage> {
    if pattern.dims() != field.dims() {
        return Err(Error::dims(pattern.dims(), field.dims()));
    }
    let (w, h) = pattern.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let [u, v] = field.get(x, y);
            out.push(sample_rgb(pattern, x as f32 - u, y as f32 - v));
        }
    }
    PatternImage::from_pixels(w, h, out)
}

fn sample_rgb(img: &PatternImage, x: f32, y: f32) -> [u8; 3] {
    let maxx = (img.width() - 1) as f32;
    let maxy = (img.height() - 1) as f32;
    let x = x.clamp(0.0, maxx);
    let y = y.clamp(0.0, maxy);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = a[ch] as f32 * (1.0 - fx) + b[ch] as f32 * fx;
        let bot = c[ch] as f32 * (1.0 - fx) + d[ch] as f32 * fx;
        out[ch] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optflow::generate_pattern;

    fn quiet() -> SkinParams {
        SkinParams {
            noise_sigma: 0.0,
            ..SkinParams::for_raster_width(160)
        }
    }

    #[test]
    fn flat_vertical_leg_has_no_extra_tilt() {
        let g = LegGeometry::default();
        assert_eq!(foot_tilt(0.0, 90.0, &g, &SkinParams::default()), 0.0);
        let stiff = SkinParams {
            compliance: 0.0,
            ..SkinParams::default()
        };
        assert_eq!(foot_tilt(0.0, 135.0, &g, &stiff), 0.0);
    }

    #[test]
    fn foot_tilt_matches_moment_formula() {
        let g = LegGeometry::default();
        let p = SkinParams::default();
        // θ_g = 9, θ_leg = 90: M = 0.04 · 9.81 · 0.11 · sin 9°
        let m = 0.04 * 9.81 * 0.11 * (9.0f64 * std::f64::consts::PI / 180.0).sin();
        let expected = 9.0 + 60.0 * m;
        assert!((foot_tilt(9.0, 90.0, &g, &p) - expected).abs() < 1e-12);
        assert!((expected - 9.4050).abs() < 1e-3);
    }

    #[test]
    fn foot_tilt_monotone_in_leg_angle() {
        let g = LegGeometry::default();
        let p = SkinParams::default();
        for tg in [-12.0, 0.0, 12.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=95 {
                let t = foot_tilt(tg, 40.0 + i as f64, &g, &p);
                assert!(t > prev);
                prev = t;
            }
        }
    }

    #[test]
    fn no_contact_no_noise_is_zero() {
        let s = ScenarioState {
            theta_g: 7.0,
            theta_leg: 100.0,
            theta_f: 7.0,
            contact: false,
            t: 0.0,
        };
        let f = deformation_field(&s, &LegGeometry::default(), &quiet(), 32, 24, 1).unwrap();
        assert!(f.vectors().iter().all(|&v| v == [0.0, 0.0]));
    }

    #[test]
    fn balanced_flat_field_is_antisymmetric() {
        let g = LegGeometry::default();
        let p = quiet();
        let s = ScenarioState::in_contact(0.0, 90.0, &g, &p);
        let (w, h) = (40, 30);
        let f = deformation_field(&s, &g, &p, w, h, 0).unwrap();
        for y in 0..h {
            for x in 0..w {
                let a = f.get(x, y);
                let b = f.get(w - 1 - x, h - 1 - y);
                assert!((a[0] + b[0]).abs() < 1e-6 && (a[1] + b[1]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn mean_shear_increases_with_ground_tilt() {
        let g = LegGeometry::default();
        let p = quiet();
        for leg in [40.0, 90.0, 135.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=24 {
                let s = ScenarioState::in_contact(-12.0 + i as f64, leg, &g, &p);
                let m = deformation_field(&s, &g, &p, 160, 140, 0).unwrap().mean_vector()[0];
                assert!(m > prev, "leg {leg} tilt {}", -12 + i);
                prev = m;
            }
        }
    }

    #[test]
    fn noise_only_when_lifted_stays_small() {
        let g = LegGeometry::default();
        let p = SkinParams::for_raster_width(160);
        let s = ScenarioState {
            contact: false,
            ..ScenarioState::in_contact(5.0, 90.0, &g, &p)
        };
        for seed in 0..20 {
            let f = deformation_field(&s, &g, &p, 64, 48, seed).unwrap();
            assert!(f.mean_magnitude() < 2.0 * p.noise_sigma);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let g = LegGeometry::default();
        let p = SkinParams::default();
        let s = ScenarioState::in_contact(3.0, 70.0, &g, &p);
        let a = deformation_field(&s, &g, &p, 50, 40, 11).unwrap();
        let b = deformation_field(&s, &g, &p, 50, 40, 11).unwrap();
        let c = deformation_field(&s, &g, &p, 50, 40, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn render_zero_field_is_identity() {
        let pat = generate_pattern(8, 6, 4, 8, 2).unwrap();
        let f = DisplacementField::zeros(32, 24);
        assert_eq!(render_frame(&pat, &f).unwrap(), pat);
    }

    #[test]
    fn render_integer_shift() {
        let pat = generate_pattern(8, 6, 4, 8, 2).unwrap();
        let f = DisplacementField::constant(32, 24, [3.0, 0.0]);
        let out = render_frame(&pat, &f).unwrap();
        for y in 0..24 {
            for x in 3..32 {
                assert_eq!(out.get(x, y), pat.get(x - 3, y));
            }
        }
    }

    #[test]
    fn render_half_pixel_is_neighbour_mean() {
        let pat = generate_pattern(8, 6, 1, 8, 4).unwrap();
        let f = DisplacementField::constant(8, 6, [0.5, 0.0]);
        let out = render_frame(&pat, &f).unwrap();
        for y in 0..6 {
            for x in 1..8 {
                let a = pat.get(x - 1, y);
                let b = pat.get(x, y);
                for c in 0..3 {
                    let mean = ((a[c] as f64 + b[c] as f64) / 2.0).round() as u8;
                    assert_eq!(out.get(x, y)[c], mean);
                }
            }
        }
    }

    #[test]
    fn render_rejects_dimension_mismatch() {
        let pat = generate_pattern(2, 2, 4, 8, 2).unwrap();
        assert!(render_frame(&pat, &DisplacementField::zeros(7, 8)).is_err());
    }
}
