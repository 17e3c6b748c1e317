fn main() {
    std::process::exit(ptseg::cli::run(std::env::args_os()));
}
