use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = rwal_cli::Cli::parse();
    if let Err(failure) = rwal_cli::execute(cli) {
        eprintln!("rwal: {failure}");
        std::process::exit(failure.exit_code());
    }
}
