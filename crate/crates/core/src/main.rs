fn main() {
    std::process::exit(birkhoff_global::cli::main_with_args(std::env::args_os()));
}
