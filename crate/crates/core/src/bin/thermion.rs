fn main() {
    let code = thermion::cli::main_with(std::env::args().collect(), std::env::var(thermion::cli::WORKERS_ENV).ok());
    std::process::exit(code);
}
