//! The `wac` command-line tool: configuration layering, the subcommands and their reports.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;

use args::{Cli, Command};
use config::{Overrides, RunConfig};
pub use error::{CliError, Result};

/// Resolves the configuration, logs it, and runs the subcommand.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let overrides = Overrides {
        seed: cli.seed,
        backend: cli.backend.map(Into::into),
        strategy: cli.strategy.clone(),
        out: cli.out.clone(),
    };
    let cfg = RunConfig::resolve(cli.config.as_deref(), &overrides)?;
    log::info!("config sha256 {}", cfg.hash()?);
    log::debug!("resolved config:\n{}", cfg.to_toml()?);

    use commands::*;
    match &cli.command {
        Command::Gen => cmd_gen(&cfg, stdout),
        Command::Train { data, lexicon } => cmd_train(&cfg, data.as_deref(), lexicon.as_deref(), stdout),
        Command::Eval {
            model,
            data,
            lexicon,
            split,
        } => {
            let split = split.as_deref().map(str::parse).transpose()?;
            cmd_eval(
                &cfg,
                model.as_deref(),
                data.as_deref(),
                lexicon.as_deref(),
                split,
                stdout,
            )
        }
        Command::Resolve {
            model,
            lexicon,
            scene,
            expression,
            data,
        } => cmd_resolve(
            &cfg,
            model.as_deref(),
            lexicon.as_deref(),
            scene,
            expression,
            data.as_deref(),
            stdout,
        ),
        Command::Embed { model } => cmd_embed(&cfg, model.as_deref(), stdout),
        Command::Sim { model, pairs, external } => {
            cmd_sim(&cfg, model.as_deref(), pairs.as_deref(), external.as_deref(), stdout)
        }
        Command::Cluster { model } => cmd_cluster(&cfg, model.as_deref(), stdout),
        Command::Probe {
            model,
            words,
            samples,
            data,
        } => cmd_probe(&cfg, model.as_deref(), words, *samples, data.as_deref(), stdout),
    }
}
