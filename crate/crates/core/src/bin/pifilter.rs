fn main() {
    std::process::exit(pifilter::cli::run(std::env::args_os()));
}
