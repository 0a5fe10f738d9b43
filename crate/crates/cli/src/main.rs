use clap::Parser;
use enzyme_net_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
        }
        Err(e) => {
            eprintln!("enzyme-net: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
