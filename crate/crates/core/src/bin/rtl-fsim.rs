fn main() {
    std::process::exit(rtl_fsim::cli::run_cli(std::env::args_os()));
}
