use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tacfoot_core::balance::{run_scenario, NetEstimator, PoseEstimator, Profile, SensorMode, TruthEstimator};
use tacfoot_core::grasp::{simulate_grasp, LoadSchedule};
use tacfoot_core::harness::{gen_dataset, split, train_on_dataset, Dataset, DatasetConfig, TactileSensor};
use tacfoot_core::optflow::{dis_flow, generate_pattern};
use tacfoot_core::posenet::{evaluate, PoseModel};
use tacfoot_core::skin_sim::render_frame;
use tacfoot_core::{DisplacementField, FlowParams};
use tacfoot_live::{ServeConfig, WorldConfig};

use crate::config::RunConfig;

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A requested check did not hold.
    CheckFailed,
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Ctx {
    fn out_file(&self, name: &str) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    fn data_path(&self, data: &Option<PathBuf>) -> PathBuf {
        data.clone().unwrap_or_else(|| self.out.join("dataset.tfds"))
    }

    fn model_path(&self, model: &Option<PathBuf>) -> PathBuf {
        model.clone().unwrap_or_else(|| self.out.join("model.tfpm"))
    }
}

pub fn gen_data(ctx: &Ctx, full: bool) -> anyhow::Result<Status> {
    let cfg = if full {
        DatasetConfig {
            grid: ctx.cfg.dataset.grid,
            label_noise: ctx.cfg.dataset.label_noise,
            ..DatasetConfig::full()
        }
    } else {
        ctx.cfg.dataset.clone()
    };
    let t = Instant::now();
    let ds = gen_dataset(&cfg, ctx.seed)?;
    let path = ctx.out_file("dataset.tfds")?;
    ds.save(&path)?;
    log::info!("generated in {:.1?}", t.elapsed());
    println!("samples {}", ds.len());
    println!("field {}x{}", cfg.field_width, cfg.field_height);
    println!("wrote {}", path.display());
    Ok(Status::Ok)
}

pub fn train(
    ctx: &Ctx,
    data: &Option<PathBuf>,
    epochs: Option<usize>,
    max_rmse: Option<f64>,
) -> anyhow::Result<Status> {
    let ds = Dataset::load(ctx.data_path(data))?;
    let mut cfg = ctx.cfg.train;
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let outcome = train_on_dataset(&ds, &cfg, |_, e| {
        log::info!(
            "epoch {} train rmse {:.4} val rmse {:?}",
            e.epoch,
            e.train_rmse,
            e.val_rmse
        );
    })?;
    let model_path = ctx.out_file("model.tfpm")?;
    outcome.model.save(&model_path)?;
    outcome.report.save_csv(ctx.out_file("loss.csv")?)?;
    print_rmse(outcome.test.rmse_theta_f, outcome.test.rmse_theta_g);
    println!("wrote {}", model_path.display());
    Ok(check_rmse(
        outcome.test.rmse_theta_f.max(outcome.test.rmse_theta_g),
        max_rmse,
    ))
}

pub fn eval(ctx: &Ctx, data: &Option<PathBuf>, model: &Option<PathBuf>, all: bool) -> anyhow::Result<Status> {
    let ds = Dataset::load(ctx.data_path(data))?;
    let model = PoseModel::load(ctx.model_path(model))?;
    let ev = if all {
        evaluate(&model, &ds.samples)?
    } else {
        let (_, test) = split(&ds.samples, ctx.cfg.train.split, ctx.cfg.train.seed)?;
        if test.is_empty() {
            bail!("held-out split is empty; pass --all to evaluate every sample");
        }
        evaluate(&model, &test)?
    };
    print_rmse(ev.rmse_theta_f, ev.rmse_theta_g);
    Ok(Status::Ok)
}

fn print_rmse(f: f64, g: f64) {
    println!("rmse_theta_f {f:.6}");
    println!("rmse_theta_g {g:.6}");
}

fn check_rmse(value: f64, limit: Option<f64>) -> Status {
    match limit {
        Some(l) if !(value <= l) => {
            eprintln!("check failed: rmse {value:.6} exceeds {l}");
            Status::CheckFailed
        }
        _ => Status::Ok,
    }
}

fn load_profile(name: &str, tilt: f64, duration: f64) -> anyhow::Result<Profile> {
    Ok(match name {
        "four-stage" => Profile::four_stage(),
        "lift" => Profile::lift_and_replace(tilt),
        "flat" => Profile::flat(duration),
        path => Profile::load(path)?,
    })
}

/// Sensor matching `data` when given, else one built from the config.
fn sensor_for(ctx: &Ctx, data: &Option<PathBuf>) -> anyhow::Result<(DatasetConfig, TactileSensor)> {
    match data {
        Some(p) => {
            let header = Dataset::load_header(p)?;
            let sensor = TactileSensor::new(&header.config, header.seed)?;
            Ok((header.config, sensor))
        }
        None => {
            let cfg = ctx.cfg.balance.sensor.clone();
            let sensor = TactileSensor::new(&cfg, ctx.seed)?;
            Ok((cfg, sensor))
        }
    }
}

pub struct BalanceArgs<'a> {
    pub profile: &'a str,
    pub mode: SensorMode,
    pub model: &'a Option<PathBuf>,
    pub data: &'a Option<PathBuf>,
    pub tilt: f64,
    pub duration: f64,
    pub max_rmse: Option<f64>,
}

pub fn run_balance(ctx: &Ctx, a: BalanceArgs) -> anyhow::Result<Status> {
    let profile = load_profile(a.profile, a.tilt, a.duration)?;
    let (sensor_cfg, sensor) = sensor_for(ctx, a.data)?;
    let cfg = tacfoot_core::balance::SimConfig {
        sensor: sensor_cfg,
        ..ctx.cfg.balance.clone()
    };
    let estimator: Box<dyn PoseEstimator> = match a.model {
        Some(p) => Box::new(NetEstimator::new(PoseModel::load(p)?)),
        None => {
            if a.mode == SensorMode::Tactile {
                log::warn!(
                    "no --model given; tactile mode reads the true angles with ±{} deg noise",
                    cfg.imu_noise
                );
            }
            Box::new(TruthEstimator::new(cfg.imu_noise, ctx.seed))
        }
    };
    let t = Instant::now();
    let trace = run_scenario(&profile, a.mode, &cfg, sensor, estimator)?;
    log::info!("{} ticks in {:.1?}", trace.len(), t.elapsed());
    let path = ctx.out_file(&format!("balance_{}.csv", a.mode))?;
    trace.save_csv(&path)?;
    let rmse = trace.tracking_rmse();
    println!("ticks {}", trace.len());
    println!("tracking_rmse {}", rmse.map_or("none".into(), |r| format!("{r:.6}")));
    println!(
        "final_error {}",
        trace
            .final_tracking_error()
            .map_or("none".into(), |r| format!("{r:.6}"))
    );
    println!("duty_held_without_contact {}", trace.duty_held_without_contact());
    println!("saturated_while_lifted {}", trace.saturated_while_lifted());
    println!(
        "lost_stance_at {}",
        trace.lost_stance_at().map_or("none".into(), |t| format!("{t:.2}"))
    );
    println!("wrote {}", path.display());
    Ok(check_rmse(rmse.unwrap_or(f64::NAN), a.max_rmse))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ControllerArg {
    On,
    Off,
    Both,
}

pub fn run_grasp(ctx: &Ctx, schedule: &str, controller: ControllerArg, check: bool) -> anyhow::Result<Status> {
    let schedule = match schedule {
        "paired" => LoadSchedule::paired_ramp(),
        "heavy" => LoadSchedule::heavy_ramp(),
        "unloaded" => LoadSchedule::unloaded(10.0),
        path => LoadSchedule::load(path)?,
    };
    let runs: &[bool] = match controller {
        ControllerArg::On => &[true],
        ControllerArg::Off => &[false],
        ControllerArg::Both => &[true, false],
    };
    let mut crossover = BTreeMap::new();
    let mut intact = BTreeMap::new();
    for &on in runs {
        let label = if on { "on" } else { "off" };
        let trace = simulate_grasp(&schedule, on, &ctx.cfg.grasp)?;
        let path = ctx.out_file(&format!("grasp_{label}.csv"))?;
        trace.save_csv(&path)?;
        println!("controller_{label}_crossover {:.2}", trace.crossover_time());
        println!("controller_{label}_intact {}", trace.intact_throughout());
        println!(
            "controller_{label}_failed_at {}",
            trace.failed_at().map_or("none".into(), |t| format!("{t:.2}"))
        );
        println!("wrote {}", path.display());
        crossover.insert(label, trace.crossover_time());
        intact.insert(label, trace.intact_throughout());
    }
    if !check {
        return Ok(Status::Ok);
    }
    let (Some(&on), Some(&off)) = (crossover.get("on"), crossover.get("off")) else {
        bail!("--check needs both controller runs (--controller both)");
    };
    let ok = off > 0.0 && on <= 0.5 * off && intact["on"];
    if !ok {
        eprintln!(
            "check failed: crossover on {on:.2} s vs off {off:.2} s, on intact {}",
            intact["on"]
        );
        return Ok(Status::CheckFailed);
    }
    Ok(Status::Ok)
}

pub struct BenchArgs<'a> {
    pub levels: &'a [usize],
    pub patches: &'a [usize],
    pub shifts: usize,
    pub budget: &'a Option<PathBuf>,
    pub record: bool,
}

#[derive(Debug, Clone)]
struct BenchRow {
    level: usize,
    patch: usize,
    epe_mean: f64,
    epe_p95: f64,
    millis: f64,
}

fn bench_key(level: usize, patch: usize) -> String {
    format!("levels{level}_patch{patch}")
}

/// Endpoint errors of every pixel at least `margin` from the border.
fn endpoint_errors(flow: &DisplacementField, uv: [f32; 2], margin: usize) -> Vec<f64> {
    let (w, h) = flow.dims();
    let mut out = Vec::new();
    for y in margin..h.saturating_sub(margin) {
        for x in margin..w.saturating_sub(margin) {
            let v = flow.vectors()[y * w + x];
            out.push((((v[0] - uv[0]) as f64).powi(2) + ((v[1] - uv[1]) as f64).powi(2)).sqrt());
        }
    }
    out
}

pub fn flow_bench(ctx: &Ctx, a: BenchArgs) -> anyhow::Result<Status> {
    let img = generate_pattern(160, 120, 4, 8, ctx.seed)?;
    let (w, h) = img.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let warps: Vec<[f32; 2]> = (0..a.shifts)
        .map(|_| [rng.random_range(-5.0f32..5.0), rng.random_range(-5.0f32..5.0)])
        .collect();
    let queries = warps
        .iter()
        .map(|&uv| render_frame(&img, &DisplacementField::constant(w, h, uv)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for &level in a.levels {
        for &patch in a.patches {
            let params = FlowParams {
                pyramid_levels: level,
                patch_size: patch,
                patch_stride: (patch / 2).max(1),
                ..ctx.cfg.flow.clone()
            };
            let mut errors = Vec::new();
            let mut per_warp = Vec::new();
            let mut millis = 0.0;
            for (q, &uv) in queries.iter().zip(&warps) {
                let t = Instant::now();
                let flow = dis_flow(&img, q, &params)?;
                millis += t.elapsed().as_secs_f64() * 1e3;
                let e = endpoint_errors(&flow, uv, 8);
                per_warp.push(e.iter().sum::<f64>() / e.len().max(1) as f64);
                errors.extend(e);
            }
            errors.sort_by(f64::total_cmp);
            let p95 = errors
                .get(((errors.len() as f64 * 0.95) as usize).min(errors.len().saturating_sub(1)))
                .copied();
            let row = BenchRow {
                level,
                patch,
                epe_mean: per_warp.iter().sum::<f64>() / per_warp.len().max(1) as f64,
                epe_p95: p95.unwrap_or(f64::NAN),
                millis: millis / queries.len().max(1) as f64,
            };
            log::info!("{row:?}");
            rows.push(row);
        }
    }
    let path = ctx.out_file("flow_bench.csv")?;
    let mut csv = String::from("level,patch,epe_mean,epe_p95,millis\n");
    for r in &rows {
        csv += &format!(
            "{},{},{:.5},{:.5},{:.2}\n",
            r.level, r.patch, r.epe_mean, r.epe_p95, r.millis
        );
    }
    std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
    print!("{csv}");
    println!("wrote {}", path.display());

    let Some(budget_path) = a.budget else {
        return Ok(Status::Ok);
    };
    if a.record {
        let budget: BTreeMap<String, f64> = rows.iter().map(|r| (bench_key(r.level, r.patch), r.millis)).collect();
        std::fs::write(budget_path, serde_json::to_string_pretty(&budget)?)
            .with_context(|| format!("writing {}", budget_path.display()))?;
        println!("recorded budget {}", budget_path.display());
        return Ok(Status::Ok);
    }
    let text = std::fs::read_to_string(budget_path).with_context(|| format!("reading {}", budget_path.display()))?;
    let budget: BTreeMap<String, f64> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", budget_path.display()))?;
    let mut status = Status::Ok;
    for r in &rows {
        if let Some(&b) = budget.get(&bench_key(r.level, r.patch)) {
            if r.millis > 1.25 * b {
                eprintln!(
                    "budget exceeded: levels {} patch {} took {:.2} ms against {:.2} ms",
                    r.level, r.patch, r.millis, b
                );
                status = Status::CheckFailed;
            }
        }
    }
    Ok(status)
}

pub struct ServeArgs<'a> {
    pub host: &'a str,
    pub port: u16,
    pub mode: SensorMode,
    pub model: &'a Option<PathBuf>,
    pub data: &'a Option<PathBuf>,
    pub speed: f64,
    pub slew: f64,
}

pub fn serve(ctx: &Ctx, a: ServeArgs) -> anyhow::Result<Status> {
    let (sensor_cfg, _) = sensor_for(ctx, a.data)?;
    let pattern_seed = match a.data {
        Some(p) => Dataset::load_header(p)?.seed,
        None => ctx.seed,
    };
    let model = a.model.as_deref().map(PoseModel::load).transpose()?;
    if model.is_none() {
        log::warn!("no --model given; tactile mode reads the true angles");
    }
    let cfg = ServeConfig {
        world: WorldConfig {
            sim: tacfoot_core::balance::SimConfig {
                sensor: sensor_cfg,
                ..ctx.cfg.balance.clone()
            },
            grasp: ctx.cfg.grasp,
            mode: a.mode,
            tilt_slew: a.slew,
            pattern_seed,
            model,
            ..WorldConfig::default()
        },
        speed: a.speed,
        ..ServeConfig::default()
    };
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("bad listen address {}:{}", a.host, a.port))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(tacfoot_live::serve(cfg, addr))?;
    Ok(Status::Ok)
}
