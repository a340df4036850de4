fn main() {
    std::process::exit(deadlock_lab::cli::main_with_args(std::env::args_os()));
}
