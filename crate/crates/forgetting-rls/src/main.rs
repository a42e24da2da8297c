fn main() {
    std::process::exit(forgetting_rls::cli::cli(std::env::args_os()));
}
