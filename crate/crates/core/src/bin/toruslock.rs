use clap::Parser;
use toruslock::cli::{diagnostic, exit_code, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let name = cli.command.name();
    if let Err(e) = run(cli) {
        eprintln!("{}", diagnostic(name, &e));
        std::process::exit(exit_code(&e));
    }
}
