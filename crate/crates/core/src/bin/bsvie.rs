fn main() {
    std::process::exit(bsvie::cli::run(std::env::args_os()));
}
