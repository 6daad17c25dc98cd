fn main() {
    std::process::exit(ictus_cli::main_impl());
}
