fn main() {
    std::process::exit(hemoshape::cli::main());
}
