use clap::Parser;
use optomech_cli::{configure_threads, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = configure_threads().and_then(|_| run(&cli));
    match result {
        Ok(outcome) => print!("{}", outcome.stdout),
        Err(e) => {
            eprintln!("optomech {}: {}", cli.command.name(), e.message());
            std::process::exit(e.exit_code());
        }
    }
}
