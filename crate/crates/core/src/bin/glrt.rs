fn main() {
    std::process::exit(glrt_robust::cli::cli_main(std::env::args_os()));
}
