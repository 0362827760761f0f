fn main() {
    std::process::exit(rankalign::cli::run(std::env::args_os()));
}
