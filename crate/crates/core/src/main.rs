fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(blockade_ladder::cli::main_exit_code(std::env::args_os()));
}
