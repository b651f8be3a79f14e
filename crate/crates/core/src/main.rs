fn main() {
    std::process::exit(ccmeasure::cli::run(std::env::args_os()));
}
