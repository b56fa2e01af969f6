fn main() {
    std::process::exit(physvac::harness::cli::cli_main(std::env::args_os()));
}
