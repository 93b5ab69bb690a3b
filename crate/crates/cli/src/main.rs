fn main() {
    std::process::exit(asc_cli::app::main_with(std::env::args_os()));
}
