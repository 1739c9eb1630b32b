fn main() {
    env_logger::init();
    std::process::exit(mbo_bench::cli::cli_main(std::env::args_os()));
}
