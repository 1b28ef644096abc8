fn main() {
    std::process::exit(fracruin::cli::main_with_args(std::env::args_os()));
}
