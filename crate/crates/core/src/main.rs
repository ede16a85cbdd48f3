fn main() {
    std::process::exit(structkde::cli::run());
}
