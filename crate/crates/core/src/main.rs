fn main() {
    std::process::exit(sdppp::cli::main_with_args(std::env::args_os()));
}
