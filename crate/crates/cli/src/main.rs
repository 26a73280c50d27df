use clap::Parser;

fn main() {
    let cli = vnb_cli::Cli::parse();
    if let Err(e) = vnb_cli::run(cli) {
        eprintln!("vnb: {e}");
        std::process::exit(e.exit_code());
    }
}
