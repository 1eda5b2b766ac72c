fn main() {
    std::process::exit(gfc::cli::main_with(std::env::args_os()));
}
