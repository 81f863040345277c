fn main() {
    std::process::exit(multikernel_cli::run(std::env::args_os()));
}
