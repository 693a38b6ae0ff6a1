fn main() {
    std::process::exit(agestand::cli::run(std::env::args_os()));
}
