fn main() {
    std::process::exit(mixed_cournot_cli::run());
}
