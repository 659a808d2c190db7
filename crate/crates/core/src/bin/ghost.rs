fn main() {
    std::process::exit(ghost_osr::cli::run(std::env::args_os()));
}
