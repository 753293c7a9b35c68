//! `iin`: generate, hold out, impute and score multi-sensor series.
//!
//! Every command writes `<command>.manifest.json` into the output directory,
//! also when it fails. Exit codes: 0 ok, 2 config, 3 data, 4 numeric.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use iin_core::Error;

use args::Cli;
use manifest::{exit_code, Manifest};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let name = commands::name(&cli.command);
    let mut manifest = Manifest::new(name, cli.deterministic);

    let result = std::fs::create_dir_all(&cli.out)
        .map_err(Error::from)
        .and_then(|()| commands::dispatch(&cli, &mut manifest));
    manifest.finish(&result);
    let path = cli.out.join(format!("{name}.manifest.json"));
    if let Err(e) = manifest.write(&path) {
        log::error!("cannot write {}: {e}", path.display());
    }

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()) as u8)
        }
    }
}
