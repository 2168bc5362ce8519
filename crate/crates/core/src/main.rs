fn main() {
    std::process::exit(gibbsrec::cli::main_with_args(std::env::args_os()));
}
