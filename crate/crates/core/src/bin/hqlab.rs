fn main() {
    std::process::exit(hqlab::cli::run(std::env::args_os()));
}
