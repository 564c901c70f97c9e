use clap::Parser;

fn main() {
    let cli = fraccur::cli::Cli::parse();
    match fraccur::cli::run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
