fn main() {
    std::process::exit(gl_spectra_cli::run(std::env::args_os()));
}
