fn main() {
    std::process::exit(ppforest::cli::main_with_args(std::env::args_os()));
}
