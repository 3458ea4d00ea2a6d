fn main() {
    std::process::exit(sdploc::cli::run(std::env::args_os()));
}
