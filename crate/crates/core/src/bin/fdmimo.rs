fn main() {
    std::process::exit(fdmimo::cli::run(std::env::args_os()));
}
