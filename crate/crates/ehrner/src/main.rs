fn main() {
    std::process::exit(ehrner::cli::main_with_args(std::env::args_os()));
}
