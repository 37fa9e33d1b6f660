fn main() {
    std::process::exit(kpz_cli::run(std::env::args_os().collect()));
}
