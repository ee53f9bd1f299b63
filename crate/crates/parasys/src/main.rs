fn main() {
    std::process::exit(parasys::cli::main_with_args(std::env::args_os()));
}
