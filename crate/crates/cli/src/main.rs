fn main() {
    std::process::exit(mvtm_cli::run(std::env::args_os()));
}
