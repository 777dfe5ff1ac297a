fn main() {
    std::process::exit(cylinder_cs::cli::main_with_args(std::env::args_os()));
}
