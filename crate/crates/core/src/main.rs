use clap::Parser;

fn main() {
    let cli = socialclust::cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = socialclust::cli::run(&cli, &mut stdout) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
