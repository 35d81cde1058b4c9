fn main() {
    std::process::exit(sdkf::cli::parse_and_dispatch(std::env::args_os()));
}
