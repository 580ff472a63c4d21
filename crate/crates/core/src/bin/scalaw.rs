fn main() {
    std::process::exit(scalaw::run_cli(std::env::args_os()));
}
