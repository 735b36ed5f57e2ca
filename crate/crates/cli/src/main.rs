use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(hcopt_cli::run(hcopt_cli::Cli::parse()));
}
