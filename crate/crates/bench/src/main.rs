fn main() {
    std::process::exit(irregular_levy_bench::cli::main_with_args(std::env::args_os()));
}
