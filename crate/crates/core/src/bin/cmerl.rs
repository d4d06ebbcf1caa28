fn main() {
    std::process::exit(cme_rl::harness::cli_main(std::env::args_os()));
}
