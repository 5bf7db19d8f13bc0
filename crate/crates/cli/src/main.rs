fn main() {
    std::process::exit(srr_cli::run(std::env::args_os()));
}
