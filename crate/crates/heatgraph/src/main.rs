fn main() {
    std::process::exit(heatgraph::cli::run(std::env::args_os()));
}
