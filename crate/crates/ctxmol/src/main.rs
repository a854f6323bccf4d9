fn main() {
    std::process::exit(ctxmol::cli::main_with_args(std::env::args_os()));
}
