fn main() {
    std::process::exit(surecvlab::cli::main_with_args(std::env::args_os()));
}
