fn main() {
    std::process::exit(treegs::cli::run(std::env::args_os()));
}
