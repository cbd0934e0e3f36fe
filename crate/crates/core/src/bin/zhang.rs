fn main() {
    std::process::exit(zhang_sandpile::cli::run(std::env::args()));
}
