fn main() {
    std::process::exit(timeagg::cli::run(std::env::args_os()));
}
