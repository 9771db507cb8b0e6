fn main() {
    std::process::exit(mpdet::cli::main());
}
