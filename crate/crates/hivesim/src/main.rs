fn main() -> std::process::ExitCode {
    hivesim::cli::main()
}
