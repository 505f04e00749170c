use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kspulse::driver::pipeline::{
    continuation_stage, equilibria_stage, pde_stage, pulse_orbit, resolvent_stage, shoot_stage, spectrum_stage,
    trap_at, trap_stage,
};
use kspulse::driver::{run_pipeline, RunConfig, SpeedSetting, EXAMPLE_CONFIG, OUT_DIR_ENV};
use kspulse::model::{RestStates, WaveParams};
use kspulse::speed_window::speed_bounds;
use kspulse::trap::certify_flux;
use kspulse::{Error, ModelSpec};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "kspulse", version, about = "Traveling pulses of a generalized Keller-Segel system")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "kspulse-out")]
    out: PathBuf,
    /// Override the wave speed (a number or "auto").
    #[arg(long, global = true)]
    speed: Option<String>,
    /// Override epsilon.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Rest states and equilibrium classification.
    Equilibria,
    /// Admissible speed window.
    SpeedWindow,
    /// Certify the trapping region.
    CertifyTrap {
        /// Samples per boundary curve.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Shoot the singular heteroclinic orbit.
    Shoot,
    /// Continue the pulse down the epsilon ladder.
    ContinueEps {
        /// Comma-separated epsilon values.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
    /// Dispersion curves and instability sweep.
    Spectrum {
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        #[arg(long)]
        tau_range: Option<f64>,
    },
    /// Resolvent bound check along the pulse.
    ResolventCheck {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Direct simulation of the seeded pulse.
    PdeSim {
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        frames: bool,
    },
    /// Run every enabled stage and write report.json.
    Pipeline,
    /// Print the bundled example configuration.
    ExampleConfig,
}

enum Failure {
    Config(Error),
    Stage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e),
            other => Failure::Stage(other),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &common.speed {
        cfg.wave.s = if s == "auto" {
            SpeedSetting::Auto
        } else {
            SpeedSetting::Fixed(s.parse().map_err(|_| {
                Failure::Config(Error::Config { line: None, message: format!("--speed: expected a number or auto, got {s}") })
            })?)
        };
    }
    if let Some(e) = common.epsilon {
        cfg.wave.epsilon = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.output.dir.clone().unwrap_or_else(|| common.out.clone());
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    Ok(dir)
}

fn emit<T: Serialize>(dir: &Path, name: &str, value: &T, pass: bool) -> Result<bool, Failure> {
    let json = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(dir.join(format!("{name}.json")), format!("{json}\n")).map_err(Error::from)?;
    println!("{json}");
    println!("{name}: {}", if pass { "pass" } else { "fail" });
    Ok(pass)
}

struct Resolved {
    model: ModelSpec,
    rest: RestStates,
    p: WaveParams,
}

fn resolve(cfg: &RunConfig) -> Result<Resolved, Failure> {
    let model = cfg.model()?;
    let rest = RestStates::resolve(&model, cfg.wave.u_minus)?;
    let s = match cfg.wave.s {
        SpeedSetting::Fixed(s) => s,
        SpeedSetting::Auto => speed_bounds(&model, &rest, cfg.wave.branch)?.midpoint(),
    };
    let p = WaveParams::new(&model, cfg.wave.u_minus, s, 0.0)?;
    Ok(Resolved { model, rest, p })
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Command::ExampleConfig = cli.command {
        print!("{EXAMPLE_CONFIG}");
        return Ok(true);
    }
    let mut cfg = load(&cli.common)?;
    let dir = out_dir(&cli.common, &cfg)?;
    match cli.command {
        Command::ExampleConfig => unreachable!(),
        Command::Pipeline => {
            let outcome = run_pipeline(&cfg, Some(&dir))?;
            outcome.write(&dir)?;
            for (name, status) in outcome.report.stages.statuses() {
                println!("{name:<14} {}", serde_json::to_string(&status).map_err(Error::from)?.trim_matches('"'));
            }
            println!("report written to {}", dir.join("report.json").display());
            Ok(outcome.exit_code() == 0)
        }
        Command::Equilibria => {
            let r = resolve(&cfg)?;
            let (summary, pass) = equilibria_stage(&r.model, &r.rest, Some(&r.p))?;
            emit(&dir, "equilibria", &summary, pass)
        }
        Command::SpeedWindow => {
            let model = cfg.model()?;
            let rest = RestStates::resolve(&model, cfg.wave.u_minus)?;
            let w = speed_bounds(&model, &rest, cfg.wave.branch)?;
            emit(&dir, "speed_window", &w, !w.is_empty())
        }
        Command::CertifyTrap { samples } => {
            if let Some(n) = samples {
                cfg.trap.samples = n;
            }
            let r = resolve(&cfg)?;
            let trap = trap_at(&r.model, &r.p, cfg.trap.margin)?;
            let flux = certify_flux(&r.model, &r.p, &trap, cfg.trap.samples)?;
            flux.write_csv(&dir.join("flux.csv"))?;
            flux.summary_table(&mut std::io::stdout()).map_err(Error::from)?;
            let (summary, pass) = trap_stage(&r.model, &r.p, &[r.p.s], cfg.trap.samples, cfg.trap.margin);
            emit(&dir, "certify_trap", &summary, pass && flux.pass)
        }
        Command::Shoot => {
            let r = resolve(&cfg)?;
            let trap = trap_at(&r.model, &r.p, cfg.trap.margin)?;
            let (summary, orbit, pass) = shoot_stage(&r.model, &r.p, &trap, &cfg.orbit)?;
            orbit.write_csv(&dir.join("orbit.csv"))?;
            emit(&dir, "shoot", &summary, pass)
        }
        Command::ContinueEps { ladder } => {
            if let Some(l) = ladder {
                cfg.continuation.ladder = l;
            }
            let r = resolve(&cfg)?;
            let trap = trap_at(&r.model, &r.p, cfg.trap.margin)?;
            let (_, orbit, _) = shoot_stage(&r.model, &r.p, &trap, &cfg.orbit)?;
            let (summary, pass) = continuation_stage(&r.model, &r.p, &orbit, &cfg.continuation.ladder, &cfg.orbit)?;
            emit(&dir, "continuation", &summary, pass)
        }
        Command::Spectrum { rho, tau_range } => {
            if let Some(r) = rho {
                cfg.spectrum.rho = r;
            }
            if let Some(t) = tau_range {
                cfg.spectrum.tau_range = t;
            }
            let r = resolve(&cfg)?;
            let p = r.p.with_epsilon(cfg.wave.epsilon);
            let (summary, pass) = spectrum_stage(&r.model, &p, &cfg.spectrum, Some(&dir))?;
            emit(&dir, "spectrum", &summary, pass)
        }
        Command::ResolventCheck { samples, seed } => {
            if let Some(n) = samples {
                cfg.resolvent.samples = n;
            }
            if let Some(s) = seed {
                cfg.resolvent.seed = s;
            }
            let r = resolve(&cfg)?;
            let p = r.p.with_epsilon(cfg.wave.epsilon);
            let orbit = pulse_orbit(&r.model, &p, &cfg.orbit)?;
            let (summary, pass) = resolvent_stage(&r.model, &p, &orbit, &cfg.resolvent)?;
            emit(&dir, "resolvent", &summary, pass)
        }
        Command::PdeSim { nodes, steps, frames } => {
            if let Some(n) = nodes {
                cfg.pde.nodes = n;
            }
            if let Some(n) = steps {
                cfg.pde.steps = n;
            }
            cfg.pde.write_frames |= frames;
            cfg.validate()?;
            let r = resolve(&cfg)?;
            let p = r.p.with_epsilon(cfg.wave.epsilon);
            let orbit = pulse_orbit(&r.model, &p, &cfg.orbit)?;
            let (spec, _) = spectrum_stage(&r.model, &p, &cfg.spectrum, None)?;
            let (summary, pass) = pde_stage(&r.model, &p, &orbit, &cfg.pde, spec.max_growth_rate, Some(&dir))?;
            emit(&dir, "pde", &summary, pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
