fn main() {
    std::process::exit(kwprep::cli::run(std::env::args_os()));
}
