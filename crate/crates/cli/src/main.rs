fn main() {
    std::process::exit(neuro01_cli::run(std::env::args_os()));
}
