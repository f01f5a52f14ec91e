//! Python module `tacfoot`: control laws, pattern generation, dataset and
//! training pipeline, and the balance and grasp simulations.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use tacfoot_core::balance::{self, NetEstimator, PoseEstimator, Profile, SensorMode, SimConfig, TruthEstimator};
use tacfoot_core::grasp::{self, GraspConfig, LoadSchedule};
use tacfoot_core::harness::{self, Dataset, DatasetConfig, TactileSensor};
use tacfoot_core::posenet::{PoseModel, TrainConfig};
use tacfoot_core::{optflow, Error, LegGeometry};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Format { .. }
        | Error::ProfileParse { .. }
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::ControlDomain { .. }
        | Error::EmptyDataset => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Motor angle for estimated ground and foot tilts, degrees.
#[pyfunction]
#[pyo3(signature = (theta_g, theta_f, shaft_offset = None, leg_length = None))]
fn control_angle(theta_g: f64, theta_f: f64, shaft_offset: Option<f64>, leg_length: Option<f64>) -> PyResult<f64> {
    let d = LegGeometry::default();
    let geom = LegGeometry {
        shaft_offset: shaft_offset.unwrap_or(d.shaft_offset),
        leg_length: leg_length.unwrap_or(d.leg_length),
        ..d
    };
    balance::control_angle(theta_g, theta_f, &geom).map_err(py_err)
}

/// PWM duty for a motor angle and its rate, with the default gains.
#[pyfunction]
#[pyo3(signature = (phi_ctrl, dphi_dt = 0.0))]
fn duty_cycle(phi_ctrl: f64, dphi_dt: f64) -> f64 {
    balance::duty_cycle(phi_ctrl, dphi_dt, &balance::ControllerGains::default())
}

/// Random colour pattern as `(width, height, rgb_bytes)`.
#[pyfunction]
#[pyo3(signature = (patches_x, patches_y, patch_px = 4, candidates = 8, seed = 0))]
fn generate_pattern<'py>(
    py: Python<'py>,
    patches_x: usize,
    patches_y: usize,
    patch_px: usize,
    candidates: usize,
    seed: u64,
) -> PyResult<(usize, usize, Bound<'py, PyBytes>)> {
    let img = optflow::generate_pattern(patches_x, patches_y, patch_px, candidates, seed).map_err(py_err)?;
    let (w, h) = img.dims();
    let bytes: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    Ok((w, h, PyBytes::new(py, &bytes)))
}

/// Writes the reduced-size tilt grid dataset to `path`; returns the sample count.
#[pyfunction]
#[pyo3(signature = (path, seed = 0))]
fn gen_dataset(path: PathBuf, seed: u64) -> PyResult<usize> {
    let ds = harness::gen_dataset(&DatasetConfig::ci(), seed).map_err(py_err)?;
    ds.save(&path).map_err(py_err)?;
    Ok(ds.len())
}

/// Trains on the dataset at `data`, saves the checkpoint to `model` and
/// returns the held-out `(rmse_theta_f, rmse_theta_g)`.
#[pyfunction]
#[pyo3(signature = (data, model, epochs = None, seed = 0))]
fn train(data: PathBuf, model: PathBuf, epochs: Option<usize>, seed: u64) -> PyResult<(f64, f64)> {
    let ds = Dataset::load(&data).map_err(py_err)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: epochs.unwrap_or(d.epochs),
        seed,
        ..d
    };
    let out = harness::train_on_dataset(&ds, &cfg, |_, _| {}).map_err(py_err)?;
    out.model.save(&model).map_err(py_err)?;
    Ok((out.test.rmse_theta_f, out.test.rmse_theta_g))
}

/// Runs a balance profile (`four-stage`, `lift`, `flat` or a JSON path).
/// Without `model` the estimator reads the true angles.
#[pyfunction]
#[pyo3(signature = (profile = "four-stage", mode = "tactile", model = None, data = None, seed = 0, tilt = 9.0))]
fn run_balance<'py>(
    py: Python<'py>,
    profile: &str,
    mode: &str,
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    seed: u64,
    tilt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mode: SensorMode = mode.parse().map_err(py_err)?;
    let profile = match profile {
        "four-stage" => Profile::four_stage(),
        "lift" => Profile::lift_and_replace(tilt),
        "flat" => Profile::flat(5.0),
        path => Profile::load(path).map_err(py_err)?,
    };
    let (sensor_cfg, pattern_seed) = match &data {
        Some(p) => {
            let h = Dataset::load_header(p).map_err(py_err)?;
            (h.config, h.seed)
        }
        None => (DatasetConfig::ci(), seed),
    };
    let sensor = TactileSensor::new(&sensor_cfg, pattern_seed).map_err(py_err)?;
    let cfg = SimConfig {
        sensor: sensor_cfg,
        seed,
        ..SimConfig::default()
    };
    let estimator: Box<dyn PoseEstimator> = match model {
        Some(p) => Box::new(NetEstimator::new(PoseModel::load(p).map_err(py_err)?)),
        None => Box::new(TruthEstimator::exact()),
    };
    let trace = balance::run_scenario(&profile, mode, &cfg, sensor, estimator).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("tracking_rmse", trace.tracking_rmse())?;
    out.set_item("final_error", trace.final_tracking_error())?;
    out.set_item("duty_held_without_contact", trace.duty_held_without_contact())?;
    out.set_item("saturated_while_lifted", trace.saturated_while_lifted())?;
    out.set_item("lost_stance_at", trace.lost_stance_at())?;
    let col = |f: fn(&balance::TraceRow) -> f64| trace.rows.iter().map(f).collect::<Vec<f64>>();
    out.set_item("t", col(|r| r.t))?;
    out.set_item("theta_g", col(|r| r.theta_g_true))?;
    out.set_item("phi_ctrl", col(|r| r.phi_ctrl))?;
    out.set_item("phi_ref", col(|r| r.phi_ref))?;
    out.set_item("duty", col(|r| r.duty))?;
    Ok(out)
}

/// Runs the grasp under a load schedule (`paired`, `heavy`, `unloaded` or a
/// JSON path).
#[pyfunction]
#[pyo3(signature = (schedule = "paired", controller = true))]
fn simulate_grasp<'py>(py: Python<'py>, schedule: &str, controller: bool) -> PyResult<Bound<'py, PyDict>> {
    let schedule = match schedule {
        "paired" => LoadSchedule::paired_ramp(),
        "heavy" => LoadSchedule::heavy_ramp(),
        "unloaded" => LoadSchedule::unloaded(10.0),
        path => LoadSchedule::load(path).map_err(py_err)?,
    };
    let trace = grasp::simulate_grasp(&schedule, controller, &GraspConfig::default()).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("crossover_time", trace.crossover_time())?;
    out.set_item("intact", trace.intact_throughout())?;
    out.set_item("failed_at", trace.failed_at())?;
    out.set_item("t", trace.rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
    out.set_item("ratio_l", trace.rows.iter().map(|r| r.ratio_l).collect::<Vec<_>>())?;
    out.set_item("ratio_r", trace.rows.iter().map(|r| r.ratio_r).collect::<Vec<_>>())?;
    out.set_item("opening", trace.rows.iter().map(|r| r.opening).collect::<Vec<_>>())?;
    Ok(out)
}

#[pymodule]
pub fn tacfoot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(control_angle, m)?)?;
    m.add_function(wrap_pyfunction!(duty_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(gen_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_balance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_grasp, m)?)?;
    Ok(())
}
