fn main() {
    std::process::exit(logdef::cli::main_with(std::env::args_os()));
}
