fn main() {
    std::process::exit(delayminer_cli::run(std::env::args_os()));
}
