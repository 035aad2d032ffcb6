fn main() {
    std::process::exit(augundo::cli::run(std::env::args_os()));
}
