fn main() {
    std::process::exit(nnsubspace::cli::run(std::env::args_os()));
}
