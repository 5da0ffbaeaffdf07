fn main() {
    std::process::exit(condrr::cli::main_with_args(std::env::args_os()));
}
