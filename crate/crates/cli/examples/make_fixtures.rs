//! Writes a synthetic fixture corpus: `make_fixtures <dir> [count] [seed]`.

use std::path::PathBuf;
use std::process::ExitCode;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: make_fixtures <dir> [count] [seed]");
        return ExitCode::from(2);
    };
    let count = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    match tamperkit::dataset::generate_fixture_corpus(&dir, count, seed) {
        Ok(files) => {
            println!("wrote {} images to {}", files.len(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
