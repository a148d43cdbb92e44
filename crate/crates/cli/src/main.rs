use clap::Parser;

fn main() {
    let cli = ldm_cli::args::Cli::parse();
    match ldm_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
