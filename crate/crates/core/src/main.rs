fn main() {
    breather::cli::init_logging();
    std::process::exit(breather::cli::run(std::env::args_os()));
}
