fn main() {
    std::process::exit(obstructa::cli::main_with_args(std::env::args_os()));
}
