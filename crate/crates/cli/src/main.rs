fn main() {
    std::process::exit(adiag::run(std::env::args_os()));
}
