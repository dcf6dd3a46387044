fn main() {
    let code = caloric_lab::cli::main_with(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
