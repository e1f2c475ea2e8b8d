fn main() {
    std::process::exit(gafzero::cli::run(std::env::args_os()));
}
