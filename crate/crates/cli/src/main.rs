fn main() {
    std::process::exit(lungcnn_cli::run(std::env::args_os()));
}
