use std::io;
use std::process::ExitCode;

use clap::Parser;
use log::error;

use shellcap::config::{Cli, RunConfig};
use shellcap::{output, run_sweep, selftest};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHELLCAP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are config errors; --help and --version are not errors
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };

    if cli.selftest {
        let checks = selftest::run_checks();
        return match selftest::report(&checks, io::stdout().lock()) {
            Ok(true) => ExitCode::SUCCESS,
            _ => ExitCode::from(2),
        };
    }

    let cfg = match RunConfig::resolve(&cli) {
        Ok(cfg) if cfg.snr_db.is_empty() => {
            error!("no SNR given (use --snr-db or the snr-db config key)");
            return ExitCode::from(1);
        }
        Ok(cfg) => cfg,
        Err(e) => {
            error!("{e:#}");
            return ExitCode::from(1);
        }
    };

    let points = match run_sweep(&cfg) {
        Ok(p) => p,
        Err(e) => {
            error!("{e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = output::write_outputs(&cfg, &points) {
        error!("{e:#}");
        return ExitCode::from(1);
    }
    if points.iter().all(|p| p.record.converged) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
