fn main() {
    let registry = pipbc::Registry::with_builtins();
    std::process::exit(pipbc::cli::run_from_args(std::env::args_os(), &registry));
}
