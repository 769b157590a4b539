use clap::Parser;

fn main() {
    let cli = fbdf_cli::Cli::parse();
    match fbdf_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(fbdf_cli::EXIT_ERROR);
        }
    }
}
