fn main() {
    std::process::exit(lipgd::harness::cli_main(std::env::args()));
}
