use clap::Parser;
use gsp_cli::{run, Cli, CliError};

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("{}", CliError::config(format!("thread pool: {e}")).diagnostic());
            std::process::exit(gsp_cli::EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            std::process::exit(e.code);
        }
    }
}
