fn main() {
    std::process::exit(prodesign_cli::run());
}
