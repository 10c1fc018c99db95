//! Command-line workflows over the `anyres` library.

pub mod args;
pub mod commands;
pub mod error;
pub mod provenance;
pub mod runconfig;

use clap::Parser;

use args::{Cli, Command};
pub use error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Ingest(a) => commands::ingest_cmd(a),
        Command::Corpus(a) => commands::corpus_cmd(a),
        Command::Stats(a) => commands::stats_cmd(a),
        Command::Pretrain(a) => commands::pretrain_cmd(a),
        Command::TrainPatches(a) => commands::train_patches_cmd(a),
        Command::Sample(a) => commands::sample_cmd(a),
        Command::Render(a) => commands::render_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Extrapolate(a) => commands::extrapolate_cmd(a),
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
