fn main() {
    std::process::exit(halfline_cli::run(std::env::args_os()));
}
