fn main() {
    std::process::exit(twoclust::cli::run(std::env::args_os()));
}
