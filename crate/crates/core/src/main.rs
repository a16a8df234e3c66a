fn main() {
    std::process::exit(chaos_edgeworth::cli::main_with_args(std::env::args_os()));
}
