use clap::Parser;
use emcl_cli::cli::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EMCL_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(e) = emcl_cli::commands::run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
