fn main() {
    std::process::exit(semipart::cli::main());
}
