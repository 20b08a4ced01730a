fn main() {
    std::process::exit(canids_cli::run_command(std::env::args_os()));
}
