fn main() {
    std::process::exit(ccotdr::cli::run(std::env::args_os()));
}
