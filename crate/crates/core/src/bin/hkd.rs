fn main() {
    std::process::exit(hkd::cli::main_with_args(std::env::args_os()));
}
