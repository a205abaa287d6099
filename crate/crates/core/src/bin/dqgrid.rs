fn main() {
    std::process::exit(dqgrid::cli::run(std::env::args_os()));
}
