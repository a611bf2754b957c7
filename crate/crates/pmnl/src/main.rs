fn main() {
    std::process::exit(pmnl::cli::main_with_args(std::env::args_os()));
}
