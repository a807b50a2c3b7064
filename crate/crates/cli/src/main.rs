mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::Command;
use config::Config;
use report::Report;

/// Runs a stage of the sparse domination pipeline and writes its reports.
///
/// Exit status: 0 when every invariant holds, 1 when one fails, 2 when the
/// configuration is rejected or a stage cannot run.
#[derive(Debug, Parser)]
#[command(name = "sparse-radon", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment file; omitted fields take the parabola preset.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory for `summary`, CSV tables and dumps.
    #[arg(long, short, default_value = "sparse-radon-out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.config.as_deref().map_or_else(|| Ok(Config::default()), Config::load) {
        Ok(mut c) => {
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c
        }
        Err(e) => return config_error(e),
    };
    if let Err(e) = cfg.validate() {
        return config_error(e);
    }
    let mut rep = Report::default();
    rep.value("command", format!("{:?}", cli.command).to_lowercase());
    rep.value("seed", cfg.seed);
    if let Err(e) = commands::run(cli.command, &cfg, &mut rep) {
        return config_error(e);
    }
    if let Err(e) = rep.write(&cli.out) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    print!("{}", rep.summary());
    if !rep.passed() {
        eprintln!("invariant failures: {}", rep.failures().join(", "));
    }
    ExitCode::from(status(&rep))
}

fn status(rep: &Report) -> u8 {
    if rep.passed() {
        0
    } else {
        1
    }
}

fn config_error(e: anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn any_failed_verdict_gives_status_one() {
        let mut rep = Report::default();
        rep.verdict("grid.axioms", true);
        assert_eq!(status(&rep), 0);
        rep.verdict("cz.good_bound", false);
        assert_eq!(status(&rep), 1);
    }
}
