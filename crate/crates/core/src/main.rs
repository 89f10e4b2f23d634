fn main() {
    std::process::exit(jtcr_core::cli::run(std::env::args_os()));
}
