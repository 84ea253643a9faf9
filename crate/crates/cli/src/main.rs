fn main() {
    std::process::exit(synthforge_cli::run(std::env::args_os()));
}
