fn main() {
    std::process::exit(iout_core::harness::cli::run(std::env::args_os()));
}
