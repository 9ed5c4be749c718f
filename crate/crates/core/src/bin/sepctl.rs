fn main() -> std::process::ExitCode {
    sepctl::cli::main()
}
