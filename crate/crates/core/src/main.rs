fn main() {
    std::process::exit(wavelane::cli::run(std::env::args_os()));
}
