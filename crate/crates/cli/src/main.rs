fn main() {
    std::process::exit(crpred_cli::main_with_args(std::env::args_os()));
}
