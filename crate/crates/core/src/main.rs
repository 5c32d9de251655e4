fn main() {
    std::process::exit(nssfit::cli::main_with_std());
}
