// SPDX-License-Identifier: MIT OR Apache-2.0

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("CPDKIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("CPDKIT_THREADS ignored: {e}");
        }
    }
    let cli = cpdkit_cli::Cli::parse();
    if let Err(e) = cpdkit_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
