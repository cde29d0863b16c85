fn main() -> std::process::ExitCode {
    uttgenre::cli::main()
}
