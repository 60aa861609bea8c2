fn main() {
    std::process::exit(tsfl_cli::run(std::env::args_os()));
}
