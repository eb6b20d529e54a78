fn main() {
    std::process::exit(mcopi::cli::run(std::env::args_os()));
}
