fn main() {
    std::process::exit(fiberfit::cli::run(std::env::args_os()));
}
