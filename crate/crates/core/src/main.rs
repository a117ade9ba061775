fn main() {
    std::process::exit(chernoff::cli::main_with_args(std::env::args_os()));
}
