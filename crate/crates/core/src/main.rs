use clap::Parser;

use cpflow::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if !cli.quiet {
                println!("{}", outcome.report);
                println!(
                    "{} -> {}",
                    if outcome.pass { "PASS" } else { "FAIL" },
                    outcome.out_dir.display()
                );
            }
            std::process::exit(outcome.exit_code());
        }
        Err(e) => {
            eprintln!("cpflow: {e}");
            std::process::exit(1);
        }
    }
}
