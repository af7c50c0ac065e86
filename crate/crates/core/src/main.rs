fn main() {
    std::process::exit(noisectl::cli::main_with_args(std::env::args_os()));
}
