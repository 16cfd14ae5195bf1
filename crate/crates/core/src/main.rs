fn main() {
    std::process::exit(semaug::cli::run(std::env::args_os()));
}
