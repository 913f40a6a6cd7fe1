fn main() {
    std::process::exit(adacbf::cli::main_with_args(std::env::args_os()));
}
