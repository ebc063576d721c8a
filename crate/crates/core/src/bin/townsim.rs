fn main() {
    std::process::exit(townsim::cli::main_with_args(std::env::args_os()));
}
