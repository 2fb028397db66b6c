fn main() {
    std::process::exit(pmsim::harness::run_cli(std::env::args_os()));
}
