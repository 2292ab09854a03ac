fn main() {
    std::process::exit(gaincert_cli::run());
}
