fn main() {
    std::process::exit(layerprune::cli::run(std::env::args_os()));
}
