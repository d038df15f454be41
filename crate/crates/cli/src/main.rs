fn main() {
    std::process::exit(cogur_cli::dispatch(std::env::args_os()));
}
