fn main() {
    std::process::exit(ctxpara::cli::run(std::env::args_os()));
}
