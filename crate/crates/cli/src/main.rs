mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::{Cli, Command};

fn print_subcommand_help(argv: &[String]) {
    let mut cmd = Cli::command();
    cmd.build();
    let name = argv
        .iter()
        .skip(1)
        .find(|a| cmd.get_subcommands().any(|s| s.get_name() == a.as_str()))
        .cloned();
    if let Some(sub) = name.as_deref().and_then(|n| cmd.find_subcommand_mut(n)) {
        eprintln!("\n{}", sub.render_help());
    } else {
        eprintln!("\n{}", cmd.render_help());
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            if matches!(e.kind(), ErrorKind::UnknownArgument | ErrorKind::InvalidSubcommand) {
                print_subcommand_help(&argv);
            }
            return ExitCode::from(code);
        }
    };
    let seed = cli.seed.unwrap_or(0);
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a, seed),
        Command::Estimate(a) => commands::estimate(a, seed),
        Command::Diagnose(a) => commands::diagnose_cmd(a, seed),
        Command::Experiment(a) => commands::experiment(a, cli.seed),
        Command::Plot(a) => commands::plot(a, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
