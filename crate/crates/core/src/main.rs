fn main() {
    std::process::exit(ragscale::cli::run());
}
