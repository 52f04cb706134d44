fn main() {
    std::process::exit(kinetic_lab::cli::run());
}
