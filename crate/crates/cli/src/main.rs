use std::ffi::OsString;

fn main() {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let mut out = std::io::stdout().lock();
    std::process::exit(rfhkit_cli::run(&argv, &mut out));
}
