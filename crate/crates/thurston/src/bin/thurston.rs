fn main() {
    std::process::exit(thurston::cli::run(std::env::args().collect()));
}
