//! The `rekom` command line: synthesize a lineage graph, derive features,
//! train and project, and serve the recommendation API.

pub mod args;
pub mod commands;
pub mod error;
pub mod server;

use std::io::Write;

pub use args::{Cli, Command};
pub use error::{CliError, EXIT_DATA, EXIT_USAGE};

/// Runs one parsed command, writing its human-readable summary to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(args) => commands::cmd_generate(args, out),
        Command::Derive(args) => commands::cmd_derive(args, out),
        Command::Train(args) => commands::cmd_train(args, out),
        Command::Serve(args) => tokio::runtime::Runtime::new()?.block_on(server::serve(args)),
    }
}
