fn main() {
    std::process::exit(homnet::cli::main());
}
