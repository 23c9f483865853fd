fn main() {
    std::process::exit(geomix_cli::run(std::env::args_os()));
}
