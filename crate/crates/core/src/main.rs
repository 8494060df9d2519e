fn main() -> std::process::ExitCode {
    dnnmg::cli::main()
}
