//! Library half of the `duss` binary: argument syntax, configuration
//! resolution and the subcommands, so the binary stays a thin shell.

pub mod args;
pub mod commands;
pub mod config;

use std::io::Write;

use duss_core::{Error, Result};
use serde_json::json;

use crate::args::{Cli, Command};
use crate::commands::Io;
use crate::config::{parse_override, resolve, PipelineConfig, Sources};

/// Process exit status for a finished command.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_data_error() => 2,
        Err(_) => 1,
    }
}

/// One JSON diagnostic line for `error`.
pub fn diagnostic(error: &Error) -> String {
    let kind = if error.is_data_error() {
        "data"
    } else {
        "usage"
    };
    json!({"level": "error", "kind": kind, "message": error.to_string()}).to_string()
}

fn command_overrides(command: &Command) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut push = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            out.push((key.to_string(), v));
        }
    };
    match command {
        Command::Generate(a) => {
            push("k", a.k.map(|v| v.to_string()));
            push("p", a.p.map(|v| v.to_string()));
            push("temperature", a.temperature.map(|v| v.to_string()));
            push("max_len", a.max_len.map(|v| v.to_string()));
        }
        Command::Tune(a) => {
            push("trials", a.trials.map(|v| v.to_string()));
            push("max_len", a.max_len.map(|v| v.to_string()));
        }
        _ => {}
    }
    out
}

/// Resolves the configuration for `cli` with `env_seed` standing in for DUSS_SEED.
pub fn resolve_config(cli: &Cli, env_seed: Option<&str>) -> Result<PipelineConfig> {
    let file_text = match &cli.config {
        Some(path) => {
            Some(std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?)
        }
        None => None,
    };
    let mut overrides = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    overrides.extend(command_overrides(&cli.command));
    resolve(&Sources {
        file_text: file_text.as_deref(),
        preset: cli.preset.as_deref(),
        overrides,
        seed_flag: cli.seed,
        env_seed,
    })
    .map_err(|e| match (&cli.config, e) {
        (Some(path), e @ Error::Config { .. }) => e.at_path(path),
        (_, e) => e,
    })
}

/// Runs one parsed command line, writing progress to `out` and warnings to `err`.
pub fn run(
    cli: &Cli,
    env_seed: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let config = resolve_config(cli, env_seed)?;
    let mut io = Io { out, err };
    match &cli.command {
        Command::SynthCorpus(a) => commands::synth_corpus(a, &config, &mut io),
        Command::TrainCodec(a) => commands::train_codec(a, &config, &mut io),
        Command::Encode(a) => commands::encode_cmd(a, &config, &mut io),
        Command::Decode(a) => commands::decode_cmd(a, &config, &mut io),
        Command::TrainLm(a) => commands::train_lm(a, &config, &mut io),
        Command::Generate(a) => commands::generate_cmd(a, &config, &mut io),
        Command::Tune(a) => commands::tune_cmd(a, &config, &mut io),
        Command::Evaluate(a) => commands::evaluate_cmd(a, &config, &mut io),
        Command::CorpusFilter(a) => commands::corpus_filter(a, &config, &mut io),
        Command::ShowConfig => commands::show_config(&config, &mut io),
    }
}
