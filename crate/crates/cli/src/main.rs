fn main() {
    std::process::exit(polyridge_cli::run(std::env::args_os()));
}
