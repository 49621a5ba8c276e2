fn main() {
    std::process::exit(trajplan_cli::main_with_args(std::env::args_os()));
}
