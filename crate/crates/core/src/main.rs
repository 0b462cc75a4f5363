fn main() {
    std::process::exit(ergolab::experiments::cli::run_cli(std::env::args_os()));
}
