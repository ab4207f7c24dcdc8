fn main() {
    std::process::exit(videostory::cli::run(std::env::args()));
}
