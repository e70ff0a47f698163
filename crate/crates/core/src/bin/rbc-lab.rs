fn main() {
    std::process::exit(rbc_lab::cli::main_with_args(std::env::args_os()));
}
