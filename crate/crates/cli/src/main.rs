fn main() {
    std::process::exit(hosvd_cli::run_cli(std::env::args_os()));
}
