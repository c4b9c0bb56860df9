fn main() {
    std::process::exit(pointpose::cli::run(std::env::args_os()));
}
