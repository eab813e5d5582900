//! Binary entry point for the `freeknot` command-line tool.

fn main() {
    std::process::exit(freeknot::cli::run(std::env::args_os()));
}
