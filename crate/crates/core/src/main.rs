fn main() {
    std::process::exit(deltasl::cli::main_with_args(std::env::args_os()));
}
