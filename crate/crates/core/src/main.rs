fn main() {
    std::process::exit(treegrp::cli::run(std::env::args_os()));
}
