fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(chansr::cli::run(std::env::args_os()))
}
