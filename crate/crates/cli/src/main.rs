use std::process::ExitCode;

use clap::Parser;
use fitgeom::Error;

use fitgeom_cli::{commands, load_config, output, Cli, RunConfig};

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("error: cannot configure threads: {e}");
            return ExitCode::from(2);
        }
    }
    let cfg = match (&cli.config, cli.command) {
        (Some(path), _) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        (None, Some(command)) => RunConfig { command, common: cli.common },
        (None, None) => {
            eprintln!("error: a subcommand or --config is required (see --help)");
            return ExitCode::from(2);
        }
    };
    match commands::run(&cfg).and_then(|a| output::write(&cfg, &a)) {
        Ok(()) => {
            println!("{}", cfg.common.out.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
