fn main() {
    std::process::exit(cbb::cli::main_with_args(std::env::args_os()));
}
