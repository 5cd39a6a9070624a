fn main() {
    std::process::exit(lles_cli::run_main(std::env::args_os()));
}
