use clap::Parser;
use ugc_eq_cli::{run, Cli, RunRequest};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(&RunRequest::from(cli)));
}
