use clap::Parser;
use ndpc::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NDPC_LOG", "info")).init();
    let code = run(Cli::parse());
    std::process::exit(code);
}
