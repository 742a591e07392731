use clap::Parser;
use dunkl::cli::{exit_code, load_config, run, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = load_config(&cli).and_then(|cfg| run(cli.command, &cfg, &cli.out));
    match result {
        Ok(out) => {
            for line in &out.summary {
                println!("{}: {line}", cli.command.name());
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
