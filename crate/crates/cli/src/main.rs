//! `bandedge`: run one experiment family and write its manifest and CSVs.
//!
//! Settings come from defaults, then an optional flat `--config` file, then
//! flags. The manifest is written before any computation starts.

mod commands;
mod config;
mod failure;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::json;

use config::{keys_for, parse_config, Kind, Settings, COMMANDS};
use failure::Failure;

const THREADS_ENV: &str = "BANDEDGE_THREADS";

fn cli() -> Command {
    let mut cmd = Command::new("bandedge")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Spectral-edge laboratory for random periodic band matrices")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("flat key=value file; flags override its keys"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("DIR")
                .default_value(".")
                .help("output directory"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .help("worker threads (fallback: BANDEDGE_THREADS)"),
        );
    for (name, about, keys) in COMMANDS {
        let mut sub = Command::new(*name).about(*about);
        for key in *keys {
            let mut arg = Arg::new(key.name).long(key.name).help(key.help);
            arg = match key.kind {
                Kind::Flag => arg.action(ArgAction::SetTrue),
                Kind::Value => arg.value_name("VALUE").allow_hyphen_values(true),
            };
            if let Some(d) = key.default.filter(|_| key.kind == Kind::Value) {
                arg = arg.help(format!("{} [default: {d}]", key.help));
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn flags_from(matches: &ArgMatches, command: &str) -> BTreeMap<&'static str, String> {
    let mut flags = BTreeMap::new();
    for key in keys_for(command) {
        if matches.value_source(key.name) != Some(ValueSource::CommandLine) {
            continue;
        }
        let v = match key.kind {
            Kind::Flag => matches.get_flag(key.name).to_string(),
            Kind::Value => matches.get_one::<String>(key.name).cloned().unwrap_or_default(),
        };
        flags.insert(key.name, v);
    }
    flags
}

fn threads(matches: &ArgMatches) -> Result<Option<usize>, Failure> {
    if let Some(t) = matches.get_one::<usize>("threads") {
        return Ok(Some(*t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| Failure::config(format!("{THREADS_ENV}={v:?}: {e}")).on_field("threads")),
        Err(_) => Ok(None),
    }
}

fn run() -> Result<(), Failure> {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            e.print()?;
            return Ok(());
        }
        Err(e) => return Err(Failure::config(e.render().to_string().trim_end().to_string())),
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let command = COMMANDS
        .iter()
        .map(|(n, _, _)| *n)
        .find(|n| *n == name)
        .expect("registered subcommand");

    let file = match sub.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{path}: {e}")).on_field("config"))?;
            parse_config(&text, keys_for(command))?
        }
        None => BTreeMap::new(),
    };
    let settings = Settings::resolve(command, file, flags_from(sub, command));
    settings.check_required()?;

    let threads = threads(sub)?;
    if let Some(t) = threads {
        if t == 0 {
            return Err(Failure::config("thread count must be positive").on_field("threads"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }

    let out = PathBuf::from(sub.get_one::<String>("out").expect("has default"));
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::new(failure::FailureKind::Io, format!("{}: {e}", out.display())))?;

    let config: BTreeMap<&str, &str> = settings.entries().collect();
    let manifest = json!({
        "tool": "bandedge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "master_seed": commands::master_seed(&settings)?,
        "rng": bandedge::sampler::RNG_ID,
        "threads": threads,
    });
    let manifest_path = out.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("serializable") + "\n",
    )
    .map_err(|e| Failure::new(failure::FailureKind::Io, format!("{}: {e}", manifest_path.display())))?;

    commands::run(&settings, &out)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.kind.exit_code())
        }
    }
}
