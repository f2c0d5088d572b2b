fn main() {
    std::process::exit(mvselect::cli::main_with_args(std::env::args_os()));
}
