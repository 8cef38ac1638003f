fn main() -> std::process::ExitCode {
    crossdepth::cli::main()
}
