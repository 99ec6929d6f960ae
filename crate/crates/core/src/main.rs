fn main() {
    std::process::exit(qca_core::cli::run(std::env::args_os()));
}
