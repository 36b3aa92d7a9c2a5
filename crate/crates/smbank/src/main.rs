fn main() {
    std::process::exit(smbank::cli::main_with(std::env::args_os()));
}
