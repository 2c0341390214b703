fn main() {
    std::process::exit(lpfsi::cli::main_with_args(std::env::args_os()));
}
