fn main() -> std::process::ExitCode {
    palquant::cli::main()
}
