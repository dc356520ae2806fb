fn main() {
    std::process::exit(msopt_cli::run_cli(std::env::args_os()));
}
