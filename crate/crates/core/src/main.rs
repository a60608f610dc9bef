fn main() {
    std::process::exit(ecoc::cli::commands::main_with_args(std::env::args_os()));
}
