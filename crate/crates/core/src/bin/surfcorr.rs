fn main() {
    std::process::exit(surfcorr::cli::run(std::env::args_os()));
}
