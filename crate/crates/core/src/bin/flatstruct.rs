use std::io::Write;

fn main() {
    let out = flatstruct::cli::run(std::env::args_os());
    if !out.summary.is_empty() {
        eprintln!("{}", out.summary.trim_end());
    }
    if !out.report.is_null() {
        let text = serde_json::to_string_pretty(&out.report).expect("report serializes") + "\n";
        match &out.json_out {
            Some(file) => {
                if let Err(e) = std::fs::write(file, text) {
                    eprintln!("cannot write {}: {e}", file.display());
                    std::process::exit(flatstruct::cli::EXIT_INPUT);
                }
            }
            None => {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
        }
    }
    std::process::exit(out.code);
}
