//! Thin executable wrapper over the library command-line interface.

fn main() {
    std::process::exit(wavelab::cli::main_from(std::env::args()));
}
