fn main() {
    std::process::exit(rewod::cli::run(std::env::args_os()));
}
