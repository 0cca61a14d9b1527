use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array4, ArrayD, Axis, Dimension, Ix3, Ix4};
use num_complex::Complex64;
use serde_json::{json, Value};

use smsrecon::baselines::{cg_sense, l1_wavelet, zero_filled, IterativeSolveLog, L1Settings};
use smsrecon::data_io::config::PriorKind;
use smsrecon::data_io::{load_weights, read_array, read_array_with_meta, write_array_with_meta, Method, ReconConfig};
use smsrecon::diffusion_prior::{CnnDenoiser, Denoiser, NoiseSchedule, ShrinkageDenoiser};
use smsrecon::grappa_lfe::{calibrate_plan, reorder_calibration, ro_grappa, PlanSettings};
use smsrecon::metrics::{evaluate, write_error_map};
use smsrecon::roger_sampler::{kspace_residual, roger_reconstruct, run_report, SamplerSettings};
use smsrecon::simulator::{AcquisitionSpec, SimulationConfig};
use smsrecon::sms_operators::{CaipiScheme, CoilMaps, Measurement, SliceStack, SmsOperator};

use crate::error::CliError;
use crate::manifest::{load_config, resolve, RunManifest};
use crate::{CalibrateArgs, EvalArgs, ReconArgs, SimulateArgs};

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config types serialize")
}

fn read<D: Dimension>(path: &Path, what: &str) -> Result<(ndarray::Array<Complex64, D>, Option<Value>), CliError> {
    let (a, header): (ArrayD<Complex64>, _) = read_array_with_meta(path)?;
    let shape = a.shape().to_vec();
    let a = a.into_dimensionality::<D>().map_err(|_| {
        CliError::Config(format!("{what} {} has shape {shape:?}, expected {} dimensions", path.display(), D::NDIM.unwrap_or(0)))
    })?;
    Ok((a, header.meta))
}

/// A stack file may also hold a single 2-D image.
fn read_stack(path: &Path, what: &str) -> Result<SliceStack, CliError> {
    let a = read_array(path)?;
    let a = match a.ndim() {
        2 => a.insert_axis(Axis(0)),
        _ => a,
    };
    let shape = a.shape().to_vec();
    let a = a
        .into_dimensionality::<Ix3>()
        .map_err(|_| CliError::Config(format!("{what} {} has shape {shape:?}, expected (slices, H, W)", path.display())))?;
    Ok(SliceStack::new(a)?)
}

fn required(p: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    p.clone().ok_or_else(|| CliError::Config(format!("missing input path `inputs.{name}`")))
}

pub fn simulate(args: &SimulateArgs) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let src = load_config(&args.config, "simulate")?;
    let mut cfg: SimulationConfig =
        serde_json::from_value(src.value).map_err(|e| CliError::Config(format!("simulation config: {e}")))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let case = cfg.run()?;
    ensure_dir(&args.out_dir)?;
    let mut m = RunManifest::new("simulate", to_value(&cfg), Some(cfg.seed));
    let outputs: [(&str, Option<Value>); 4] = [
        ("truth", Some(json!({ "kind": "truth" }))),
        ("maps", Some(json!({ "kind": "maps" }))),
        ("measurement", Some(json!({ "kind": "measurement", "acquisition": case.acquisition }))),
        ("calibration", Some(json!({ "kind": "calibration", "caipi_shifts": case.acquisition.caipi_shifts }))),
    ];
    for (name, meta) in outputs {
        let path = args.out_dir.join(format!("{name}.smsc"));
        match name {
            "truth" => write_array_with_meta(case.truth.data(), meta, &path)?,
            "maps" => write_array_with_meta(case.maps.data(), meta, &path)?,
            "measurement" => write_array_with_meta(case.measurement.kspace(), meta, &path)?,
            _ => write_array_with_meta(&case.calibration, meta, &path)?,
        }
        m.outputs.insert(name.into(), path);
    }
    m.timings.insert("total_seconds".into(), started.elapsed().as_secs_f64());
    m.write(&args.out_dir)?;
    Ok(m)
}

/// Config plus CLI overrides, with input paths made absolute.
fn recon_config(config: &Path, subcommand: &str) -> Result<ReconConfig, CliError> {
    let src = load_config(config, subcommand)?;
    let mut cfg: ReconConfig =
        serde_json::from_value(src.value).map_err(|e| CliError::Config(format!("reconstruction config: {e}")))?;
    let fix = |p: &mut Option<PathBuf>| {
        if let Some(q) = p.as_mut() {
            *q = resolve(&src.base, q);
        }
    };
    fix(&mut cfg.inputs.measurement);
    fix(&mut cfg.inputs.maps);
    fix(&mut cfg.inputs.calibration);
    fix(&mut cfg.inputs.truth);
    if let Some(w) = cfg.prior.weights.as_mut() {
        *w = resolve(&src.base, w);
    }
    Ok(cfg)
}

fn acquisition_from_meta(meta: &Option<Value>) -> Option<AcquisitionSpec> {
    meta.as_ref()?.get("acquisition").and_then(|a| serde_json::from_value(a.clone()).ok())
}

/// Explicit config shifts win, then the acquisition recorded with the data,
/// then the pixel-aligned default.
fn scheme_for(cfg: &ReconConfig, recorded: Option<&[f64]>, w: usize) -> Result<CaipiScheme, CliError> {
    if cfg.caipi_shifts.is_some() {
        return Ok(cfg.caipi_scheme(w)?);
    }
    match recorded {
        Some(s) => Ok(CaipiScheme::new(s.to_vec())?),
        None => Ok(cfg.caipi_scheme(w)?),
    }
}

struct Inputs {
    y: Measurement,
    maps: CoilMaps,
    scheme: CaipiScheme,
    calibration: Option<Array4<Complex64>>,
    truth: Option<SliceStack>,
}

fn load_inputs(cfg: &ReconConfig, m: &mut RunManifest) -> Result<Inputs, CliError> {
    let mpath = required(&cfg.inputs.measurement, "measurement")?;
    let (kspace, meta) = read::<Ix3>(&mpath, "measurement")?;
    m.inputs.insert("measurement".into(), mpath.clone());
    let (_, rows, w) = kspace.dim();
    if rows % cfg.mb != 0 {
        return Err(CliError::Config(format!("measurement readout {rows} is not a multiple of mb={}", cfg.mb)));
    }
    let h = rows / cfg.mb;
    let acq = match acquisition_from_meta(&meta) {
        Some(a) => {
            if (a.mb, a.r) != (cfg.mb, cfg.r) {
                return Err(CliError::Config(format!(
                    "config mb={} r={} but the measurement was acquired with mb={} r={}",
                    cfg.mb, cfg.r, a.mb, a.r
                )));
            }
            a
        }
        None => AcquisitionSpec::new(cfg.mb, cfg.r, w),
    };
    let pattern = acq.pattern(h, w)?;
    let y = Measurement::new(kspace, pattern, acq.noise_sigma)?;
    let scheme = scheme_for(cfg, acquisition_from_meta(&meta).as_ref().map(|a| a.caipi_shifts.as_slice()), w)?;

    let maps_path = required(&cfg.inputs.maps, "maps")?;
    let (maps, _) = read::<Ix4>(&maps_path, "maps")?;
    m.inputs.insert("maps".into(), maps_path);
    let maps = CoilMaps::new(maps)?;

    let calibration = match &cfg.inputs.calibration {
        Some(p) => {
            m.inputs.insert("calibration".into(), p.clone());
            Some(read::<Ix4>(p, "calibration")?.0)
        }
        None => None,
    };
    let truth = match &cfg.inputs.truth {
        Some(p) => {
            m.inputs.insert("truth".into(), p.clone());
            Some(read_stack(p, "truth")?)
        }
        None => None,
    };
    cfg.validate_for_matrix(h, w)?;
    Ok(Inputs { y, maps, scheme, calibration, truth })
}

fn denoiser(cfg: &ReconConfig, schedule: &NoiseSchedule) -> Result<Box<dyn Denoiser>, CliError> {
    match cfg.prior.kind {
        PriorKind::Shrinkage => Ok(Box::new(ShrinkageDenoiser::new(
            cfg.prior.wavelet_levels,
            cfg.prior.threshold_scale,
            schedule.clone(),
        )?)),
        PriorKind::Cnn => {
            let path = cfg
                .prior
                .weights
                .as_ref()
                .ok_or_else(|| CliError::Config("prior.kind = cnn needs prior.weights".into()))?;
            let weights = load_weights(path)?;
            if weights.schedule != cfg.schedule {
                return Err(CliError::Config(format!(
                    "weights were trained with schedule {:?}, config has {:?}",
                    weights.schedule, cfg.schedule
                )));
            }
            Ok(Box::new(CnnDenoiser::from_manifest(&weights)?))
        }
    }
}

fn solve_log(log: &IterativeSolveLog) -> Value {
    to_value(log)
}

pub fn recon(args: &ReconArgs) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let mut cfg = recon_config(&args.config, "recon")?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.method {
        cfg.method = v.parse()?;
    }
    if let Some(v) = args.lfe_size {
        cfg.lfe_size = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    cfg.validate()?;
    let cfg_json = to_value(&cfg);
    let mut m = RunManifest::new("recon", cfg_json.clone(), Some(cfg.seed));
    let inp = load_inputs(&cfg, &mut m)?;
    ensure_dir(&args.out_dir)?;

    let op = SmsOperator::new(&inp.maps, &inp.scheme, inp.y.pattern())?;
    let t0 = Instant::now();
    let (image, mut report) = match cfg.method {
        Method::Roger => {
            let schedule = NoiseSchedule::from_params(&cfg.schedule)?;
            let den = denoiser(&cfg, &schedule)?;
            let settings = SamplerSettings::from_config(&cfg);
            let out = roger_reconstruct(
                &inp.y,
                &inp.maps,
                &inp.scheme,
                inp.calibration.as_ref(),
                den.as_ref(),
                &schedule,
                &settings,
            )?;
            (out.image, run_report(&out.diagnostics, Some(&cfg_json), None))
        }
        Method::Zerofill => (zero_filled(&inp.y, &inp.maps, &inp.scheme)?, json!({})),
        Method::Cgsense => {
            let (x, log) = cg_sense(&inp.y, &inp.maps, &inp.scheme, cfg.solver.cg_iters, cfg.solver.cg_tol)?;
            (x, json!({ "solver": solve_log(&log) }))
        }
        Method::L1wavelet => {
            let settings = L1Settings {
                lambda: cfg.solver.l1_lambda,
                iters: cfg.solver.l1_iters,
                step: cfg.solver.step,
                levels: cfg.prior.wavelet_levels,
            };
            let (x, log) = l1_wavelet(&inp.y, &inp.maps, &inp.scheme, &settings)?;
            (x, json!({ "solver": solve_log(&log) }))
        }
        Method::Rograppa => {
            let calib = inp
                .calibration
                .as_ref()
                .ok_or_else(|| CliError::Config("method rograppa needs inputs.calibration".into()))?;
            let ext = reorder_calibration(calib, &inp.scheme)?;
            let settings = plan_settings(&cfg);
            let plan = calibrate_plan(&ext, cfg.mb, cfg.r, &settings)?;
            (ro_grappa(&inp.y, &plan, &inp.maps, &inp.scheme)?, json!({}))
        }
    };
    let recon_seconds = t0.elapsed().as_secs_f64();
    if !image.is_finite() {
        return Err(CliError::Numerical("reconstruction contains non-finite values".into()));
    }
    if cfg.method != Method::Roger {
        report["method"] = to_value(&cfg.method);
        report["final_residual"] = json!(kspace_residual(&image, &inp.y, &op)?);
        report["config"] = cfg_json;
    }
    if let Some(truth) = &inp.truth {
        report["metrics"] = to_value(&evaluate(truth, &image)?);
    }

    let recon_path = args.out_dir.join("recon.smsc");
    write_array_with_meta(image.data(), Some(json!({ "kind": "recon", "method": cfg.method, "seed": cfg.seed })), &recon_path)?;
    let report_path = args.out_dir.join("report.json");
    write_json(&report_path, &report)?;
    m.outputs.insert("recon".into(), recon_path);
    m.outputs.insert("report".into(), report_path);
    m.timings.insert("recon_seconds".into(), recon_seconds);
    m.timings.insert("total_seconds".into(), started.elapsed().as_secs_f64());
    m.write(&args.out_dir)?;
    Ok(m)
}

fn plan_settings(cfg: &ReconConfig) -> PlanSettings {
    PlanSettings {
        n_src: cfg.grappa.source_lines,
        n_orth: cfg.grappa.orth_taps,
        tikhonov: cfg.grappa.tikhonov,
        causal: false,
    }
}

pub fn calibrate(args: &CalibrateArgs) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let mut cfg = recon_config(&args.config, "calibrate")?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    let mut m = RunManifest::new("calibrate", to_value(&cfg), None);
    let cpath = required(&cfg.inputs.calibration, "calibration")?;
    let (calib, meta) = read::<Ix4>(&cpath, "calibration")?;
    m.inputs.insert("calibration".into(), cpath);
    let recorded: Option<Vec<f64>> =
        meta.as_ref().and_then(|v| v.get("caipi_shifts")).and_then(|v| serde_json::from_value(v.clone()).ok());
    if recorded.is_none() && cfg.caipi_shifts.is_none() {
        return Err(CliError::Config(
            "calibration file records no CAIPI shifts; set caipi_shifts in the config".into(),
        ));
    }
    let scheme = scheme_for(&cfg, recorded.as_deref(), calib.dim().3)?;
    let ext = reorder_calibration(&calib, &scheme)?;
    let plan = calibrate_plan(&ext, cfg.mb, cfg.r, &plan_settings(&cfg))?;

    ensure_dir(&args.out_dir)?;
    for (name, k) in [("kernel_readout", &plan.readout), ("kernel_pe", &plan.phase_encode)] {
        let path = args.out_dir.join(format!("{name}.smsc"));
        k.save(&path)?;
        m.outputs.insert(name.into(), path);
    }
    let report = json!({
        "readout": { "factor": plan.readout.factor(), "residuals": plan.readout.residuals() },
        "phase_encode": { "factor": plan.phase_encode.factor(), "residuals": plan.phase_encode.residuals() },
    });
    let rpath = args.out_dir.join("calibration_report.json");
    write_json(&rpath, &report)?;
    m.outputs.insert("report".into(), rpath);
    m.timings.insert("total_seconds".into(), started.elapsed().as_secs_f64());
    m.write(&args.out_dir)?;
    Ok(m)
}

pub fn eval(args: &EvalArgs) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    let (reference, test, png) = match &args.config {
        Some(c) => {
            let src = load_config(c, "eval")?;
            let get = |k: &str| {
                src.inputs
                    .get(k)
                    .cloned()
                    .or_else(|| src.value.get(k).and_then(Value::as_str).map(|s| resolve(&src.base, Path::new(s))))
                    .ok_or_else(|| CliError::Config(format!("eval config lacks `{k}`")))
            };
            let png = args.png || src.value.get("png").and_then(Value::as_bool).unwrap_or(false);
            (get("reference")?, get("test")?, png)
        }
        None => {
            let need = |p: &Option<PathBuf>, k: &str| {
                p.as_ref().map(|p| resolve(Path::new("."), p)).ok_or_else(|| CliError::Config(format!("--{k} is required")))
            };
            (need(&args.reference, "reference")?, need(&args.test, "test")?, args.png)
        }
    };
    let config = json!({ "reference": reference, "test": test, "png": png });
    let mut m = RunManifest::new("eval", config, None);
    let r = read_stack(&reference, "reference")?;
    let t = read_stack(&test, "test")?;
    m.inputs.insert("reference".into(), reference);
    m.inputs.insert("test".into(), test);
    let report = evaluate(&r, &t)?;
    ensure_dir(&args.out_dir)?;
    let mpath = args.out_dir.join("metrics.json");
    write_json(&mpath, &to_value(&report))?;
    m.outputs.insert("metrics".into(), mpath);
    if png {
        let p = args.out_dir.join("error_map.png");
        write_error_map(&r, &t, 0.1, &p)?;
        m.outputs.insert("error_map".into(), p);
    }
    m.timings.insert("total_seconds".into(), started.elapsed().as_secs_f64());
    m.write(&args.out_dir)?;
    Ok(m)
}
