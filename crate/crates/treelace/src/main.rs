fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(treelace::cli::run(&argv));
}
