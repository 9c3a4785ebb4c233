fn main() {
    std::process::exit(sstextu::cli::main());
}
