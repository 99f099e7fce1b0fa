fn main() {
    std::process::exit(dpne::cli::run(std::env::args_os()));
}
