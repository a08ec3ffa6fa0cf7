fn main() {
    std::process::exit(stepwise::cli::run_cli(std::env::args_os()));
}
