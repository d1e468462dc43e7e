fn main() {
    std::process::exit(orbitlab::experiments::cli::main_with_args(std::env::args_os()));
}
