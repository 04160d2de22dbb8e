fn main() {
    std::process::exit(ldp_lab::cli::run(std::env::args_os()));
}
