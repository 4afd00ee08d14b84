fn main() {
    std::process::exit(heatbayes::cli::cli_dispatch(std::env::args_os()));
}
