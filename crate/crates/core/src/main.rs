fn main() {
    std::process::exit(kincal::cli::main_with_args(std::env::args_os()));
}
