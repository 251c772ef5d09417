fn main() {
    std::process::exit(selfexcite::cli::run(std::env::args_os()));
}
