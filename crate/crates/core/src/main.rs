fn main() {
    std::process::exit(holdercone::cli::main_with_args(std::env::args_os()));
}
