fn main() {
    std::process::exit(bpgs::cli::main_with_args(std::env::args_os().skip(1)));
}
