fn main() {
    std::process::exit(pseudolabel::cli::run(std::env::args_os()));
}
