//! Writes a small four-class image tree for trying the CLI without the CT
//! dataset.
//!
//! ```text
//! cargo run -p lungcnn-cli --example synthetic -- <dir> [per-class] [size]
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use lungcnn::data::synthetic::write_quadrant_tree;

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(root) = args.next().map(PathBuf::from) else {
        eprintln!("usage: synthetic <dir> [per-class] [size]");
        return ExitCode::from(1);
    };
    let per_class = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let size = args.next().and_then(|s| s.parse().ok()).unwrap_or(64);
    match write_quadrant_tree(&root, per_class, size, 1000) {
        Ok(()) => {
            println!("wrote {} images under {}", 4 * per_class, root.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
