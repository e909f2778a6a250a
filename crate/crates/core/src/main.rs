fn main() {
    std::process::exit(guiprobe::cli::run(std::env::args_os()));
}
