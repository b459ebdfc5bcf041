fn main() {
    std::process::exit(checksupport::cli::run());
}
