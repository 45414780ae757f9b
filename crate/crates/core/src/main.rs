fn main() {
    std::process::exit(cimmino_core::cli::main_with_args(std::env::args_os()));
}
