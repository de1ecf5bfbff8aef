fn main() -> std::process::ExitCode {
    setgrad::cli::main()
}
