fn main() {
    std::process::exit(spatial_bandit::cli::main_with_args(std::env::args_os()));
}
