fn main() -> std::process::ExitCode {
    gazeread::cli::main()
}
