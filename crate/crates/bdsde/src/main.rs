fn main() {
    std::process::exit(bdsde::cli::run(std::env::args_os()));
}
