fn main() {
    std::process::exit(pauli_noise::cli::run(std::env::args_os()));
}
