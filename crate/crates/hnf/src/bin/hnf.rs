fn main() {
    std::process::exit(hnf::cli::run(std::env::args_os()));
}
