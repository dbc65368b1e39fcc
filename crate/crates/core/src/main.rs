fn main() {
    std::process::exit(quadtrack::cli::main_with_args(std::env::args_os()));
}
