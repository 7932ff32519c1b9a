fn main() -> std::process::ExitCode {
    nms_core::cli::main()
}
