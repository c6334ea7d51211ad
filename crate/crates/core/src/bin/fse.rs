fn main() {
    std::process::exit(fse_core::cli::run_command(std::env::args_os()));
}
