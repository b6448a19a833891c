use clap::Parser;

fn main() {
    let cli = homsim_cli::Cli::parse();
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    if let Err(e) = homsim_cli::run(&cli, &mut out, &mut err) {
        eprintln!("homsim: {e}");
        std::process::exit(e.exit_code());
    }
}
