fn main() {
    std::process::exit(hitrun_cli::run_cli(std::env::args_os()));
}
