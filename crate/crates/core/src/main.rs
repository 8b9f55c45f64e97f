fn main() {
    std::process::exit(distq::cli::main_with_args(std::env::args_os()));
}
