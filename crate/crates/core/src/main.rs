fn main() {
    std::process::exit(fireprox::io::cli::run_cli(std::env::args_os()));
}
