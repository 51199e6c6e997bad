fn main() {
    std::process::exit(tilt::cli::main());
}
