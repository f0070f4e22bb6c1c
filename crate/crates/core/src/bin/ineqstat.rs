fn main() {
    std::process::exit(ineqstat::cli::dispatch(std::env::args_os()));
}
