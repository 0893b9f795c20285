fn main() {
    std::process::exit(topoverify::cli::run(std::env::args_os()));
}
