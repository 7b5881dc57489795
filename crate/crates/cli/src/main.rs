use clap::Parser;
use hamdelay_cli::{commands, execute, Cli, LOG_ENV};

fn main() -> std::process::ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let code = match execute(cli.command, &cli.global) {
        Ok(outcome) => {
            println!(
                "{}: {} ({})",
                cli.command.name(),
                if outcome.passed { "passed" } else { "FAILED" },
                outcome.report.display()
            );
            outcome.exit_code()
        }
        Err(err) => {
            eprintln!("error: {err}");
            commands::write_error(cli.command, &cli.global, &err);
            err.exit_code()
        }
    };
    std::process::ExitCode::from(code as u8)
}
