use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::contact::{
    classify_phase, grip_controller_step, nominal_mu, Band, ContactPhase, ContactWrench, FrictionModel, FN_EPS,
};
use crate::{Error, Result, GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub t: f64,
    /// kg on top of the object.
    pub added_mass: f64,
}

/// Added mass over time, linear between points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadSchedule {
    points: Vec<LoadPoint>,
}

impl LoadSchedule {
    pub fn new(points: Vec<LoadPoint>) -> Result<Self> {
        if points.iter().any(|p| !p.t.is_finite() || !(p.added_mass >= 0.0)) {
            return Err(Error::InvalidArgument(
                "load points need finite t and non-negative mass".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidArgument(
                "load schedule times must be non-decreasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[LoadPoint] {
        &self.points
    }

    pub fn duration(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }

    pub fn added_mass(&self, t: f64) -> f64 {
        let ps = &self.points;
        let i = ps.partition_point(|p| p.t <= t);
        match (i.checked_sub(1).map(|j| &ps[j]), ps.get(i)) {
            (None, Some(b)) => b.added_mass,
            (Some(a), Some(b)) if b.t > a.t => a.added_mass + (b.added_mass - a.added_mass) * (t - a.t) / (b.t - a.t),
            (Some(a), _) => a.added_mass,
            (None, None) => 0.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let points: Vec<LoadPoint> = serde_json::from_str(text).map_err(|e| Error::ProfileParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// No weight added for `duration` seconds.
    pub fn unloaded(duration: f64) -> Self {
        Self {
            points: vec![
                LoadPoint {
                    t: 0.0,
                    added_mass: 0.0,
                },
                LoadPoint {
                    t: duration,
                    added_mass: 0.0,
                },
            ],
        }
    }

    fn ramp(peak: f64, up: f64, hold: f64, down: f64) -> Self {
        let p = |t, added_mass| LoadPoint { t, added_mass };
        let t1 = 1.0 + up;
        let t2 = t1 + hold;
        let t3 = t2 + down;
        Self {
            points: vec![
                p(0.0, 0.0),
                p(1.0, 0.0),
                p(t1, peak),
                p(t2, peak),
                p(t3, 0.0),
                p(t3 + 1.0, 0.0),
            ],
        }
    }

    /// Load to 0.66 kg over 4 s, hold 2 s, unload over 4 s.
    pub fn paired_ramp() -> Self {
        Self::ramp(0.66, 4.0, 2.0, 4.0)
    }

    /// Load to 1.2 kg over 6 s, hold 2 s, unload over 2 s.
    pub fn heavy_ramp() -> Self {
        Self::ramp(1.2, 6.0, 2.0, 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspConfig {
    pub friction: FrictionModel,
    /// Working normal-force range used for the nominal friction, N.
    pub fn_range: [f64; 2],
    /// Band width around the nominal friction.
    pub band_d: f64,
    pub rate_hz: f64,
    /// kg.
    pub object_mass: f64,
    /// Opening at first contact, mm.
    pub object_width: f64,
    /// Normal force per mm of squeeze, N/mm.
    pub stiffness: f64,
    /// Opening at t = 0, mm.
    pub initial_opening: f64,
    pub opening_range: [f64; 2],
    /// Ratio reading gains, left and right.
    pub sensor_gain: [f64; 2],
    /// Object slide speed per newton of unbalanced load, mm/(s·N).
    pub slide_gain: f64,
    /// Slide beyond which the object is lost, mm.
    pub slide_limit: f64,
    /// Ratio drop rate marking slip, 1/s.
    pub slip_rate: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            friction: FrictionModel::default(),
            fn_range: [0.0, 20.0],
            band_d: 0.1,
            rate_hz: 50.0,
            object_mass: 0.3,
            object_width: 100.0,
            stiffness: 0.1,
            initial_opening: 50.0,
            opening_range: [0.0, 140.0],
            sensor_gain: [1.0, 1.0],
            slide_gain: 50.0,
            slide_limit: 10.0,
            slip_rate: 0.5,
        }
    }
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        self.friction.validate(self.fn_range[1])?;
        if !(self.band_d > 0.0 && self.rate_hz > 0.0 && self.stiffness > 0.0 && self.object_mass >= 0.0) {
            return Err(Error::InvalidArgument(
                "grasp config needs positive d, rate and stiffness".into(),
            ));
        }
        if !(self.opening_range[0] < self.opening_range[1]) {
            return Err(Error::InvalidArgument("empty opening range".into()));
        }
        Ok(())
    }

    pub fn band(&self) -> Result<Band> {
        Ok(Band {
            mu: nominal_mu(&self.friction, self.fn_range)?,
            d: self.band_d,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRow {
    pub t: f64,
    pub left: ContactWrench,
    pub right: ContactWrench,
    pub ratio_l: Option<f64>,
    pub ratio_r: Option<f64>,
    /// `None` once the contact is broken.
    pub phase_l: Option<ContactPhase>,
    pub phase_r: Option<ContactPhase>,
    /// Opening, mm.
    pub opening: f64,
    /// Object slide, mm.
    pub slide: f64,
    pub slipping: bool,
    pub intact: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspTrace {
    pub band: Option<Band>,
    pub dt: f64,
    pub rows: Vec<GraspRow>,
}

pub const GRASP_HEADER: &str = "t,fl_t,fl_n,fr_t,fr_n,ratio_l,ratio_r,phase_l,phase_r,D_g,slide,intact";

impl GraspTrace {
    /// Total time either ratio is above the band, s.
    pub fn crossover_time(&self) -> f64 {
        let Some(band) = self.band else { return 0.0 };
        let over = |r: Option<f64>| r.is_some_and(|r| r > band.upper());
        self.rows.iter().filter(|r| over(r.ratio_l) || over(r.ratio_r)).count() as f64 * self.dt
    }

    pub fn intact_throughout(&self) -> bool {
        self.rows.iter().all(|r| r.intact)
    }

    pub fn failed_at(&self) -> Option<f64> {
        self.rows.iter().find(|r| !r.intact).map(|r| r.t)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{GRASP_HEADER}")?;
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let ph = |p: Option<ContactPhase>| p.map_or("broken", ContactPhase::as_str);
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.left.f_t(),
                r.left.f_n(),
                r.right.f_t(),
                r.right.f_n(),
                num(r.ratio_l),
                num(r.ratio_r),
                ph(r.phase_l),
                ph(r.phase_r),
                r.opening,
                r.slide,
                r.intact as u8,
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }
}

/// Outcome of one stick/slip update of the shared object contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionStep {
    /// Tangential force carried per finger, N.
    pub f_t: f64,
    pub slipping: bool,
    /// Drop in carried force at slip onset, `(μ_s − μ_k)·F_n`.
    pub onset_drop: Option<f64>,
}

/// Per-finger friction update given the tangential `demand` and normal
/// force: sticks until the demand passes `μ_s·F_n`, then carries `μ_k·F_n`
/// until the demand falls back to it.
pub fn friction_step(model: &FrictionModel, demand: f64, f_n: f64, slipping: bool) -> FrictionStep {
    let cap_s = model.mu_static(f_n) * f_n;
    let cap_k = model.mu_kinetic(f_n) * f_n;
    if slipping {
        if demand <= cap_k {
            FrictionStep {
                f_t: demand,
                slipping: false,
                onset_drop: None,
            }
        } else {
            FrictionStep {
                f_t: cap_k,
                slipping: true,
                onset_drop: None,
            }
        }
    } else if demand > cap_s {
        FrictionStep {
            f_t: cap_k,
            slipping: true,
            onset_drop: Some(cap_s - cap_k),
        }
    } else {
        FrictionStep {
            f_t: demand,
            slipping: false,
            onset_drop: None,
        }
    }
}

/// Incremental grasp loop; one call to [`GraspSim::step`] is one control tick.
#[derive(Debug, Clone)]
pub struct GraspSim {
    cfg: GraspConfig,
    band: Band,
    dt: f64,
    tick: u64,
    opening: f64,
    slide: f64,
    slipping: bool,
    intact: bool,
    phases: [ContactPhase; 2],
    prev_ratio: [Option<f64>; 2],
}

impl GraspSim {
    pub fn new(cfg: GraspConfig) -> Result<Self> {
        cfg.validate()?;
        let band = cfg.band()?;
        Ok(Self {
            band,
            dt: 1.0 / cfg.rate_hz,
            tick: 0,
            opening: cfg.initial_opening.clamp(cfg.opening_range[0], cfg.opening_range[1]),
            slide: 0.0,
            slipping: false,
            intact: true,
            phases: [ContactPhase::Stable; 2],
            prev_ratio: [None; 2],
            cfg,
        })
    }

    pub fn config(&self) -> &GraspConfig {
        &self.cfg
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn intact(&self) -> bool {
        self.intact
    }

    /// Back to the initial grasp.
    pub fn reset(&mut self) {
        self.tick = 0;
        self.opening = self
            .cfg
            .initial_opening
            .clamp(self.cfg.opening_range[0], self.cfg.opening_range[1]);
        self.slide = 0.0;
        self.slipping = false;
        self.intact = true;
        self.phases = [ContactPhase::Stable; 2];
        self.prev_ratio = [None; 2];
    }

    /// Advances one tick with `added_mass` kg hanging from the object.
    pub fn step(&mut self, added_mass: f64, controller_on: bool) -> Result<GraspRow> {
        let cfg = &self.cfg;
        let dt = self.dt;
        let t = self.tick as f64 * dt;
        self.tick += 1;
        let weight = (cfg.object_mass + added_mass) * GRAVITY;
        let f_n = if self.intact {
            cfg.stiffness * (cfg.object_width - self.opening).max(0.0)
        } else {
            0.0
        };
        if self.intact && f_n <= FN_EPS {
            self.intact = false;
        }
        let f_t = if self.intact {
            let step = friction_step(&cfg.friction, 0.5 * weight, f_n, self.slipping);
            self.slipping = step.slipping;
            if self.slipping {
                self.slide += cfg.slide_gain * (weight - 2.0 * step.f_t) * dt;
            }
            if self.slide > cfg.slide_limit {
                self.intact = false;
            }
            step.f_t
        } else {
            0.0
        };
        let (f_t, f_n) = if self.intact { (f_t, f_n) } else { (0.0, 0.0) };

        let wrenches = [
            ContactWrench::from_components(cfg.sensor_gain[0] * f_t, f_n),
            ContactWrench::from_components(cfg.sensor_gain[1] * f_t, f_n),
        ];
        let mut phase_out = [None; 2];
        let mut ratios = [None; 2];
        for i in 0..2 {
            ratios[i] = wrenches[i].ratio();
            if let Some(r) = ratios[i] {
                let rate = self.prev_ratio[i].map_or(0.0, |p| (r - p) / dt);
                self.phases[i] = classify_phase(self.phases[i], r, rate, self.band, cfg.slip_rate)?;
                phase_out[i] = Some(self.phases[i]);
            }
            self.prev_ratio[i] = ratios[i];
        }
        let row = GraspRow {
            t,
            left: wrenches[0],
            right: wrenches[1],
            ratio_l: ratios[0],
            ratio_r: ratios[1],
            phase_l: phase_out[0],
            phase_r: phase_out[1],
            opening: self.opening,
            slide: self.slide,
            slipping: self.slipping,
            intact: self.intact,
        };
        if controller_on && self.intact {
            self.opening =
                grip_controller_step(&wrenches[0], &wrenches[1], self.opening, self.band, cfg.opening_range)?;
        }
        Ok(row)
    }
}

/// Two-finger parallel gripper holding an object under a vertical load.
pub fn simulate_grasp(schedule: &LoadSchedule, controller_on: bool, cfg: &GraspConfig) -> Result<GraspTrace> {
    let mut sim = GraspSim::new(*cfg)?;
    let mut trace = GraspTrace {
        band: Some(sim.band()),
        dt: sim.dt(),
        rows: Vec::new(),
    };
    if schedule.points().is_empty() {
        return Ok(trace);
    }
    let ticks = (schedule.duration() / sim.dt() + 1e-9).floor() as usize + 1;
    for k in 0..ticks {
        let t = k as f64 * sim.dt();
        trace.rows.push(sim.step(schedule.added_mass(t), controller_on)?);
    }
    Ok(trace)
}
