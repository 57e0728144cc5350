fn main() {
    std::process::exit(dlreg::cli::run());
}
