fn main() {
    std::process::exit(quadrisk::cli::run(std::env::args_os()));
}
