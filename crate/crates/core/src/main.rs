fn main() {
    std::process::exit(toa_lab::cli::run(std::env::args_os()));
}
