fn main() {
    std::process::exit(trendkern::cli::main_with_args(std::env::args_os()));
}
