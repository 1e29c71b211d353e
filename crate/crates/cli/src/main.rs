fn main() {
    std::process::exit(jed_cli::run_cli(std::env::args_os()));
}
