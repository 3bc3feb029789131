use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqkd::adversary::{AttackModel, Normalization};
use cqkd::experiment::{run, ExperimentConfig, ExperimentKind, OutputFormat};
use cqkd::optics::Setting;
use cqkd::Error;
use serde_json::{json, Map, Value};

const DEFAULT_DURATION_S: f64 = 20.0;

#[derive(Parser, Debug)]
#[command(name = "cqkd", version, about = "Counterfactual QKD interferometer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one protocol session with random settings.
    Session(Common),
    /// Step the path difference at a fixed setting and fit the fringes.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Rotation setting, e.g. "0,0" or "pi/2,pi/2".
        #[arg(long, value_parser = parse_setting)]
        setting: Option<Setting>,
        #[arg(long, allow_hyphen_values = true)]
        start_um: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        stop_um: Option<f64>,
        #[arg(long)]
        step_um: Option<f64>,
    },
    /// Bin counts over a long acquisition at a fixed path difference.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_setting)]
        setting: Option<Setting>,
        #[arg(long)]
        bin_s: Option<f64>,
    },
    /// Estimate QBER and the security margins from one session.
    Security {
        #[command(flatten)]
        common: Common,
        /// Override the dark-count estimate of gamma.
        #[arg(long)]
        gamma: Option<f64>,
        /// Override the detector efficiency used by the time-shift term.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Repeat fixed-setting sessions and tabulate mean counts per setting.
    Table1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sessions: Option<u32>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Session length, dwell per scan point, or total stability time [default: 20].
    #[arg(long, allow_hyphen_values = true)]
    duration: Option<f64>,
    /// none, ts or ir:<p>.
    #[arg(long, value_parser = parse_with::<AttackModel>)]
    attack: Option<AttackModel>,
    /// heralded, conclusive or conclusive-key.
    #[arg(long, value_parser = parse_with::<Normalization>)]
    normalization: Option<Normalization>,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long, value_parser = parse_with::<OutputFormat>)]
    format: Option<OutputFormat>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    let angle = |t: &str| match t.trim() {
        "0" => Ok(false),
        "pi/2" | "90" => Ok(true),
        other => Err(format!("rotation {other:?} must be 0 or pi/2")),
    };
    let (a, b) = s
        .trim_matches(|c| c == '{' || c == '}')
        .split_once(',')
        .ok_or_else(|| format!("setting {s:?} must look like \"0,pi/2\""))?;
    Ok(Setting::new(angle(a)?, angle(b)?))
}

struct CliError {
    kind: &'static str,
    message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        kind: "usage",
        message: message.into(),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config types serialize")
}

fn section<'a>(root: &'a mut Map<String, Value>, key: &str) -> Result<&'a mut Map<String, Value>, CliError> {
    root.entry(key)
        .or_insert_with(|| json!({}))
        .as_object_mut()
        .ok_or_else(|| usage(format!("config field {key:?} must be an object")))
}

fn build_config(command: Command) -> Result<(ExperimentConfig, Option<usize>), CliError> {
    let (kind, common) = match &command {
        Command::Session(c) => (ExperimentKind::ProtocolSession, c),
        Command::Scan { common, .. } => (ExperimentKind::FringeScan, common),
        Command::Stability { common, .. } => (ExperimentKind::Stability, common),
        Command::Security { common, .. } => (ExperimentKind::SecurityReport, common),
        Command::Table1 { common, .. } => (ExperimentKind::Table1Repro, common),
    };
    let mut root = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            match serde_json::from_str::<Value>(&text).map_err(Error::from)? {
                Value::Object(m) => m,
                _ => return Err(Error::InvalidConfig("configuration must be a JSON object".into()).into()),
            }
        }
        None => Map::new(),
    };
    if let Some(Value::String(k)) = root.get("experiment") {
        if k != kind.tag() {
            return Err(usage(format!("config is for experiment {k:?} but the subcommand runs {:?}", kind.tag())));
        }
    }
    root.insert("experiment".into(), to_value(&kind));
    if let Some(seed) = common.seed {
        root.insert("seed".into(), seed.into());
    }
    if !root.contains_key("seed") {
        return Err(usage("a seed is required: pass --seed or set \"seed\" in the config"));
    }
    match common.duration {
        Some(d) => {
            root.insert("duration_s".into(), d.into());
        }
        None => {
            root.entry("duration_s").or_insert(DEFAULT_DURATION_S.into());
        }
    }
    if let Some(a) = &common.attack {
        root.insert("attack".into(), to_value(a));
    }
    if let Some(n) = &common.normalization {
        root.insert("normalization".into(), to_value(n));
    }
    if common.out.is_some() || common.format.is_some() {
        let output = section(&mut root, "output")?;
        if let Some(p) = &common.out {
            output.insert("path".into(), to_value(p));
        }
        if let Some(f) = &common.format {
            output.insert("format".into(), to_value(f));
        }
    }
    let threads = common.threads;
    let mut set = |key: &str, field: &str, v: Option<Value>| -> Result<(), CliError> {
        if let Some(v) = v {
            section(&mut root, key)?.insert(field.into(), v);
        }
        Ok(())
    };
    match command {
        Command::Session(_) => {}
        Command::Scan {
            setting,
            start_um,
            stop_um,
            step_um,
            ..
        } => {
            set("scan", "setting", setting.as_ref().map(to_value))?;
            set("scan", "start_um", start_um.map(Value::from))?;
            set("scan", "stop_um", stop_um.map(Value::from))?;
            set("scan", "step_um", step_um.map(Value::from))?;
        }
        Command::Stability { setting, bin_s, .. } => {
            set("stability", "setting", setting.as_ref().map(to_value))?;
            set("stability", "bin_s", bin_s.map(Value::from))?;
        }
        Command::Security { gamma, eta, .. } => {
            set("security", "gamma", gamma.map(Value::from))?;
            set("security", "eta", eta.map(Value::from))?;
        }
        Command::Table1 { sessions, .. } => {
            set("table1", "sessions", sessions.map(Value::from))?;
        }
    }
    let cfg = ExperimentConfig::from_json(&Value::Object(root).to_string())?;
    Ok((cfg, threads))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (cfg, threads) = build_config(cli.command)?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    let artifact = run(&cfg)?;
    if cfg.output.path.is_some() {
        println!("{}", artifact.summary);
    } else {
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        out.write_all(&artifact.bytes)
            .and_then(|_| out.flush())
            .map_err(Error::from)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = usage(e.to_string().trim_end());
            eprintln!("{}", json!({"error": {"kind": err.kind, "message": err.message}}));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": e.kind, "message": e.message}}));
            ExitCode::FAILURE
        }
    }
}
