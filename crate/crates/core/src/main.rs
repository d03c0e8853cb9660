fn main() {
    std::process::exit(tailors::cli::cli_run(std::env::args_os()));
}
