use std::process::ExitCode;

use clap::Parser;
use duss_cli::args::Cli;
use duss_cli::{diagnostic, exit_code, run};
use serde_json::json;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!(
                "{}",
                json!({"level": "error", "kind": "usage", "message": message.trim_end()})
            );
            return ExitCode::from(1);
        }
    };
    let env_seed = std::env::var("DUSS_SEED").ok();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let result = run(&cli, env_seed.as_deref(), &mut out, &mut err);
    if let Err(e) = &result {
        eprintln!("{}", diagnostic(e));
    }
    ExitCode::from(exit_code(&result) as u8)
}
