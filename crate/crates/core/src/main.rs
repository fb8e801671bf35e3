fn main() {
    std::process::exit(stochwave::cli::main_with_args(std::env::args_os()));
}
