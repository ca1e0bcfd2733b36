fn main() {
    std::process::exit(homm::cli::run(std::env::args_os()));
}
