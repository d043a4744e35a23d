fn main() {
    std::process::exit(bigjump::harness::cli::run(std::env::args_os()));
}
