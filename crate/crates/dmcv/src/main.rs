use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dmcv::characterize::{characterize, Characterization};
use dmcv::config::{Config, Profile};
use dmcv::formats::{decode_frame, encode_frame, read_file, write_file, write_json};
use dmcv::keyrate::key_rate;
use dmcv::pipeline::{simulate_run_frame, write_outputs, Session};
use dmcv::report::sweep_csv;
use dmcv::Result;

#[derive(Parser)]
#[command(name = "dmcv", version, about = "QPSK CV-QKD protocol simulator with certified key rates")]
struct Cli {
    /// JSON configuration; fields override the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Profile used when no config is given, or to override the config's.
    #[arg(long, global = true, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the run frame and write frame.bin.
    Simulate,
    /// Simulate the characterization frame and store it by content hash.
    Characterize,
    /// Entropy bound for a stored or fresh characterization.
    Keyrate {
        #[arg(long)]
        characterization: Option<PathBuf>,
    },
    /// Run the protocol on a stored frame.
    Postprocess {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        characterization: Option<PathBuf>,
    },
    /// Simulate and run the protocol once.
    Run {
        #[arg(long)]
        characterization: Option<PathBuf>,
    },
    /// One run per Δ_r on a shared frame; writes sweep.csv.
    Sweep {
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.55,0.6,0.65,0.7")]
        grid: Vec<f64>,
        #[arg(long)]
        characterization: Option<PathBuf>,
    },
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    match s {
        "paper" => Ok(Profile::Paper),
        "desk" => Ok(Profile::Desk),
        _ => Err(format!("unknown profile {s:?} (paper|desk)")),
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut doc = match &cli.config {
        Some(p) => serde_json::from_slice(&read_file(p)?)?,
        None => serde_json::json!({}),
    };
    if let Some(p) = cli.profile {
        doc["profile"] = serde_json::to_value(p)?;
    }
    if let Some(s) = cli.seed {
        doc["seed"] = s.into();
    }
    Config::from_value(doc)
}

fn session(cfg: Config, ch: &Option<PathBuf>, out: &Path) -> Result<Session> {
    let ch = match ch {
        Some(p) => Characterization::load(p)?,
        None => {
            let c = characterize(&cfg)?;
            let path = c.store(out)?;
            eprintln!("characterization: {}", path.display());
            c
        }
    };
    Ok(Session::with_characterization(cfg, ch))
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    std::fs::create_dir_all(out).map_err(|e| dmcv::Error::Io { path: out.clone(), source: e })?;
    match &cli.cmd {
        Cmd::Simulate => {
            let frame = simulate_run_frame(&cfg, cfg.seed)?;
            write_file(&out.join("frame.bin"), &encode_frame(&frame))?;
        }
        Cmd::Characterize => {
            let path = characterize(&cfg)?.store(out)?;
            println!("{}", path.display());
        }
        Cmd::Keyrate { characterization } => {
            let s = session(cfg, characterization, out)?;
            let kr = key_rate(&s.cfg, &s.ch)?;
            write_json(&out.join("keyrate.json"), &kr)?;
            println!("QRE ∈ [{:.6}, {:.6}] bits/symbol", kr.bound.lower, kr.bound.upper);
        }
        Cmd::Postprocess { frame, characterization } => {
            let frame = decode_frame(&read_file(frame)?)?;
            let s = session(cfg, characterization, out)?;
            let res = s.run_on_frame(&frame, s.cfg.seed, s.cfg.params.delta_r)?;
            write_outputs(out, &res)?;
            println!("{}", res.report.status.as_str());
        }
        Cmd::Run { characterization } => {
            let s = session(cfg, characterization, out)?;
            let res = s.run(s.cfg.seed)?;
            write_outputs(out, &res)?;
            let bits = res.report.key_length.map_or(0, |k| k.bits);
            println!("{} ({bits} bits)", res.report.status.as_str());
        }
        Cmd::Sweep { grid, characterization } => {
            let s = session(cfg, characterization, out)?;
            let rows = s.sweep(grid, s.cfg.seed)?;
            let (table, reports): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            write_file(&out.join("sweep.csv"), sweep_csv(&table).as_bytes())?;
            write_json(&out.join("sweep.json"), &reports)?;
            print!("{}", sweep_csv(&table));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
