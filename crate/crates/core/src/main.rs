fn main() {
    std::process::exit(adetag::cli::run(std::env::args_os()));
}
