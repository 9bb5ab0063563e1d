fn main() -> std::process::ExitCode {
    swing_impedance::cli::main()
}
