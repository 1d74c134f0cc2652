fn main() {
    std::process::exit(msfbm_cli::run(std::env::args_os()));
}
