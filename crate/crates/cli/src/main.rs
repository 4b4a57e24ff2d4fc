fn main() {
    std::process::exit(nmdyn_cli::main_with_args(std::env::args_os()));
}
