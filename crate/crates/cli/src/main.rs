use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter_or("TREEFLOW_LOG", "warn"))
        .format_timestamp(None)
        .init();
    std::process::exit(treeflow_cli::main_with_args(std::env::args_os()));
}
