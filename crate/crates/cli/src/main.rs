use clap::Parser;

use eraser_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("eraser: {e}");
            std::process::exit(e.code);
        }
    }
}
