fn main() {
    std::process::exit(jetkcc::cli::main_with_args(std::env::args_os()));
}
