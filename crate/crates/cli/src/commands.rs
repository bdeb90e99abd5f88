use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;
use serde_json::json;

use erasure_core::analysis::{aggregate, deficit_report, fit_work_model, work_histogram, EnsembleStats, FitResult};
use erasure_core::calibration::{
    bistable_equilibrium, compare_reconstruction, mode_equivalence, reconstruct, single_well_check,
};
use erasure_core::config::{load_config, RunConfig};
use erasure_core::dynamics::SimConfig;
use erasure_core::energetics::ledger_check;
use erasure_core::ensemble::{run_ensemble, run_sweep, EnsembleSpec, ProtocolKind};
use erasure_core::io::{read_csv, read_json, write_csv, write_json};
use erasure_core::measurement::{
    draw_pairs, erasure_prob_analytic, gaussian_channel_mi, mi_monte_carlo, mi_quadrature, MixtureModel, SensorModel,
};
use erasure_core::protocol::{ErasureRun, InitialWell, SYMMETRIC_DUTY};
use erasure_core::rng::stream_id;

use crate::{GlobalArgs, ValidationError};

const MI_ENSEMBLE: u32 = 0x4D49_0000;
/// Thermal spreads at which mi.json also reports I.
const SIGMA_T_SENSITIVITY: [f64; 3] = [30.0, 43.0, 60.0];
/// Minimum samples per bin for the reconstruction comparison.
const RECONSTRUCTION_MIN_COUNT: u64 = 100;

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(args: &GlobalArgs) -> Result<Self> {
        let mut config = match &args.config {
            Some(path) => load_config(path).map_err(|e| ValidationError(e.to_string()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = args.seed {
            config = config.with_seed(seed);
        }
        if let Some(jobs) = args.jobs {
            if jobs == 0 {
                return Err(ValidationError("--jobs must be >= 1".into()).into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .context("configuring the worker pool")?;
        }
        let out = args.out.clone().unwrap_or_else(|| config.output_dir.clone());
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { config, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn seed(&self) -> u64 {
        self.config.seed()
    }
}

fn runs_file(kind: ProtocolKind, d: f64) -> String {
    format!("runs/{}_d{d:.3}.csv", kind.as_str())
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        anyhow::bail!("{} not found; run `{producer}` first", path.display())
    }
}

pub fn calibrate(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let cal = &cfg.calibration;
    let sim = SimConfig { dt: cal.dt, ..cfg.sim.clone() };
    let single = single_well_check(&sim, &cfg.potential, cal.single_well_steps)?;
    let bistable = bistable_equilibrium(&cfg.sim, &cfg.potential, cal)?;
    let curve = reconstruct(&bistable, cfg.sim.temperature)?;
    let recon = compare_reconstruction(
        &curve,
        &bistable.histogram,
        &cfg.potential,
        SYMMETRIC_DUTY,
        cfg.sim.thermal_energy(),
        RECONSTRUCTION_MIN_COUNT,
    )?;
    let modes = mode_equivalence(&cfg.sim, &cfg.potential, cal)?;
    curve.save_csv(&ctx.path("potential_reconstructed.csv"))?;
    write_json(
        &json!({
            "seed": ctx.seed(),
            "preset": cfg.preset,
            "single_well": single,
            "bistable": bistable,
            "sigma_T_nm": bistable.sigma_thermal,
            "reconstruction": recon,
            "mode_equivalence": modes,
        }),
        &ctx.path("calibration.json"),
    )?;
    println!(
        "single well: var {:.1} nm² (expected {:.1}), τ_r {:.4e} s (expected {:.4e})",
        single.variance, single.expected_variance, single.relaxation_time, single.expected_relaxation_time
    );
    println!("σ_T = {:.2} nm; reconstruction max error {:.3} kT over {} bins", bistable.sigma_thermal, recon.max_abs_error, recon.bins_compared);
    println!("averaged vs multiplexed TV = {:.4}", modes.total_variation);
    Ok(())
}

#[derive(Debug, Args)]
pub struct EraseArgs {
    /// Tilt duty ratio (default: protocol.d_erase).
    #[arg(long)]
    pub d: Option<f64>,
    /// Sensor noise in nm (default: sensor.sigma_n_nm).
    #[arg(long)]
    pub sigma_n: Option<f64>,
    /// Number of runs (default: n_runs).
    #[arg(long)]
    pub n_runs: Option<usize>,
    /// Tilt unconditionally instead of measuring.
    #[arg(long)]
    pub openloop: bool,
    /// Initial well: left, right or random (default: protocol.init).
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitialWell>,
}

fn parse_init(s: &str) -> std::result::Result<InitialWell, String> {
    match s {
        "left" => Ok(InitialWell::Left),
        "right" => Ok(InitialWell::Right),
        "random" => Ok(InitialWell::Random),
        _ => Err(format!("expected left, right or random, got '{s}'")),
    }
}

pub fn erase(ctx: &Context, args: &EraseArgs) -> Result<()> {
    let cfg = &ctx.config;
    let d = args.d.unwrap_or(cfg.protocol.d_erase);
    let schedule = cfg.protocol.schedule(d)?;
    let sensor = SensorModel::new(args.sigma_n.unwrap_or(cfg.sensor.sigma_n))?;
    let n_runs = args.n_runs.unwrap_or(cfg.n_runs);
    if n_runs == 0 {
        return Err(ValidationError("--n-runs must be >= 1".into()).into());
    }
    let kind = if args.openloop { ProtocolKind::OpenLoop } else { ProtocolKind::Feedback };
    let runs = run_ensemble(&EnsembleSpec {
        kind,
        schedule: &schedule,
        sim: &cfg.sim,
        params: &cfg.potential,
        sensor: &sensor,
        init: args.init.unwrap_or(cfg.protocol.init),
        n_runs,
        ensemble_index: 0,
    })?;
    write_csv(&runs, &ctx.path("erase_runs.csv"))?;
    let stats = (runs.len() >= 2).then(|| aggregate(&runs)).transpose()?;
    write_json(
        &json!({
            "seed": ctx.seed(),
            "protocol": kind,
            "schedule": schedule,
            "stats": stats,
            "work_histogram": work_histogram(&runs, cfg.work_bin_width)?,
        }),
        &ctx.path("erase_summary.json"),
    )?;
    if let Some(s) = stats {
        println!(
            "{} d={d} n={}: ⟨W⟩ = {:.4} ± {:.4} kT, p̂ = {:.4} ± {:.4}, P(W=0) = {:.3}",
            kind.as_str(),
            s.n_runs,
            s.mean_w,
            s.se_w,
            s.p_hat,
            s.se_p,
            s.zero_mass
        );
    }
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let points = run_sweep(cfg)?;
    let runs_dir = ctx.path("runs");
    std::fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;
    let mut meta = Vec::new();
    for p in &points {
        write_csv(&p.feedback, &ctx.path(&runs_file(ProtocolKind::Feedback, p.d)))?;
        write_csv(&p.openloop, &ctx.path(&runs_file(ProtocolKind::OpenLoop, p.d)))?;
        meta.push(json!({
            "d": p.d,
            "tau_s": p.tau,
            "feedback_work_histogram": work_histogram(&p.feedback, cfg.work_bin_width)?,
            "openloop_work_histogram": work_histogram(&p.openloop, cfg.work_bin_width)?,
        }));
        let (f, o) = (&p.feedback_stats, &p.openloop_stats);
        println!(
            "d={:.3} τ={:.4e} s: feedback ⟨W⟩={:.4}±{:.4} p̂={:.4}; open-loop ⟨W⟩={:.4}±{:.4} p̂={:.4}",
            p.d, p.tau, f.mean_w, f.se_w, f.p_hat, o.mean_w, o.se_w, o.p_hat
        );
    }
    let fb: Vec<_> = points.iter().map(|p| p.feedback_stats.clone()).collect();
    let ol: Vec<_> = points.iter().map(|p| p.openloop_stats.clone()).collect();
    write_csv(&fb, &ctx.path("sweep_feedback.csv"))?;
    write_csv(&ol, &ctx.path("sweep_openloop.csv"))?;
    write_json(
        &json!({
            "seed": ctx.seed(),
            "preset": cfg.preset,
            "n_runs": cfg.n_runs,
            "sigma_n_nm": cfg.sensor.sigma_n,
            "points": meta,
        }),
        &ctx.path("sweep.json"),
    )?;
    Ok(())
}

fn load_sweep(ctx: &Context, name: &str) -> Result<Vec<EnsembleStats>> {
    let path = ctx.path(name);
    require(&path, "sweep")?;
    Ok(read_csv(&path)?)
}

fn fit_summary(fit: &FitResult) -> serde_json::Value {
    json!({
        "A": fit.a,
        "B": fit.b,
        "se_A": fit.se_a(),
        "se_B": fit.se_b(),
        "cov": fit.cov,
        "chi2": fit.chi2,
        "dof": fit.dof,
    })
}

pub fn fit(ctx: &Context) -> Result<()> {
    let points = load_sweep(ctx, "sweep_feedback.csv")?;
    let fit = fit_work_model(&points)?;
    let info = mi_quadrature(&ctx.config.mixture, &ctx.config.sensor)?;
    let deficit = deficit_report(&fit, info);
    write_json(
        &json!({
            "seed": ctx.seed(),
            "fit": fit_summary(&fit),
            "deficit": deficit,
        }),
        &ctx.path("fit.json"),
    )?;
    println!(
        "A = {:.4} ± {:.4} kT, B = {:.4} ± {:.4} kT, χ² = {:.3} ({} dof)",
        fit.a,
        fit.se_a(),
        fit.b,
        fit.se_b(),
        fit.chi2,
        fit.dof
    );
    println!("deficit ln2 − A = {:.4} kT vs I = {:.4}", deficit.deficit, deficit.mutual_information);
    Ok(())
}

pub fn mi(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let quad = mi_quadrature(&cfg.mixture, &cfg.sensor)?;
    let pairs = draw_pairs(&cfg.mixture, &cfg.sensor, cfg.mi_samples, ctx.seed(), stream_id(MI_ENSEMBLE, 0));
    let mc = mi_monte_carlo(&pairs, &cfg.mixture, &cfg.sensor)?;
    let sensitivity = SIGMA_T_SENSITIVITY
        .iter()
        .map(|&s| {
            let mix = MixtureModel { sigma_thermal: s, ..cfg.mixture };
            Ok(json!({ "sigma_T_nm": s, "I": mi_quadrature(&mix, &cfg.sensor)? }))
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(
        &json!({
            "seed": ctx.seed(),
            "sigma_n_nm": cfg.sensor.sigma_n,
            "sigma_T_nm": cfg.mixture.sigma_thermal,
            "L_nm": cfg.mixture.half_separation,
            "p_left": cfg.mixture.p_left,
            "I_quadrature": quad,
            "I_monte_carlo": mc,
            "z_score": (mc.value - quad) / mc.std_error,
            "I_single_gaussian_channel": gaussian_channel_mi(cfg.mixture.half_separation.hypot(cfg.mixture.sigma_thermal), cfg.sensor.sigma_n),
            "sigma_T_sensitivity": sensitivity,
        }),
        &ctx.path("mi.json"),
    )?;
    println!("I = {quad:.6} nats (quadrature), {:.6} ± {:.6} (Monte Carlo, N = {})", mc.value, mc.std_error, mc.samples);
    Ok(())
}

pub fn report(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let feedback = load_sweep(ctx, "sweep_feedback.csv")?;
    let openloop = load_sweep(ctx, "sweep_openloop.csv")?;

    let calibration_path = ctx.path("calibration.json");
    let (sigma_t, sigma_t_source) = if calibration_path.exists() {
        let cal: serde_json::Value = read_json(&calibration_path)?;
        let s = cal["sigma_T_nm"]
            .as_f64()
            .with_context(|| format!("{} has no sigma_T_nm", calibration_path.display()))?;
        (s, "calibration")
    } else {
        (cfg.mixture.sigma_thermal, "config")
    };
    let mixture = MixtureModel { sigma_thermal: sigma_t, ..cfg.mixture };
    let info = mi_quadrature(&mixture, &cfg.sensor)?;

    let mut points = Vec::new();
    for fb in &feedback {
        let ol = openloop
            .iter()
            .find(|o| o.d == fb.d)
            .with_context(|| format!("sweep_openloop.csv has no row for d = {}", fb.d))?;
        let runs_path = ctx.path(&runs_file(ProtocolKind::Feedback, fb.d));
        require(&runs_path, "sweep")?;
        let runs: Vec<ErasureRun> = read_csv(&runs_path)?;
        let ledger = ledger_check(&runs, info, cfg.p_target)?;
        let sensor = SensorModel::new(fb.sigma_n.unwrap_or(cfg.sensor.sigma_n))?;
        let predicted = erasure_prob_analytic(ol.p_hat, &mixture, &sensor)?;
        let se = fb.se_p.hypot(ol.se_p);
        let gap = fb.p_hat - predicted.value;
        points.push(json!({
            "d": fb.d,
            "ledger": ledger.report,
            "p_hat": ledger.p_hat,
            "admissible": ledger.admissible,
            "erasure_probability": {
                "p_hat": fb.p_hat,
                "se_p": fb.se_p,
                "p_hat_openloop": ol.p_hat,
                "se_p_openloop": ol.se_p,
                "predicted": predicted.value,
                "out_of_range": predicted.out_of_range,
                "combined_se": se,
                "within_2se": gap.abs() <= 2.0 * se,
            },
        }));
    }

    let monotone = feedback.windows(2).all(|w| w[1].mean_w + 2.0 * w[0].se_w.hypot(w[1].se_w) >= w[0].mean_w);
    let fit = match fit_work_model(&feedback) {
        Ok(fit) => Some(fit),
        Err(e) => {
            eprintln!("warning: work-model fit skipped: {e}");
            None
        }
    };
    let deficit = fit.as_ref().map(|f| deficit_report(f, info));
    let bound_holds = fit.as_ref().map(|f| f.a >= (std::f64::consts::LN_2 - info) - 2.0 * f.se_a());
    let fit = fit.as_ref().map(fit_summary);
    write_json(
        &json!({
            "seed": ctx.seed(),
            "p_target": cfg.p_target,
            "sigma_T_nm": sigma_t,
            "sigma_T_source": sigma_t_source,
            "I": info,
            "points": points,
            "mean_W_nondecreasing": monotone,
            "fit": fit,
            "deficit": deficit,
            "A_respects_bound": bound_holds,
        }),
        &ctx.path("report.json"),
    )?;
    println!("report: I = {info:.4} nats, {} sweep points", feedback.len());
    Ok(())
}
