fn main() {
    std::process::exit(sparsectl::cli::run(std::env::args_os()));
}
