use clap::Parser;

fn main() {
    let cli = verbatim_cli::Cli::parse();
    match verbatim_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
