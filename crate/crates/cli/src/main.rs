fn main() {
    std::process::exit(slopes_cli::main_with_args(std::env::args_os()));
}
