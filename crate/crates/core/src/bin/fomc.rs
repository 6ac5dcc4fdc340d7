fn main() {
    std::process::exit(fomc_spillovers::cli::run(std::env::args_os()));
}
