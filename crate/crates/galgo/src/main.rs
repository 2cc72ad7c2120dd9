fn main() {
    std::process::exit(galgo::cli::main_with_args(std::env::args_os()));
}
