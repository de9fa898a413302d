fn main() {
    std::process::exit(edapnc_sim::cli::run(std::env::args_os()));
}
