fn main() {
    std::process::exit(singletsim::cli::main_with_args(std::env::args_os()));
}
