fn main() {
    std::process::exit(riesz_cli::run_from_env());
}
