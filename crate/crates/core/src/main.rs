fn main() -> std::process::ExitCode {
    misspair::cli::main()
}
