fn main() {
    env_logger::init();
    std::process::exit(ulasan::cli::dispatch(std::env::args()));
}
