//! Regenerates the bundled scenario files under `scenarios/`.
//!
//! Usage: `cargo run -p gittins --example dump_scenarios [dir]`

use gittins::scenario::bundled;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "scenarios".into());
    std::fs::create_dir_all(&dir)?;
    for file in bundled() {
        let path = format!("{dir}/{}.json", file.name);
        let mut text = serde_json::to_string_pretty(&file).expect("scenario serialization");
        text.push('\n');
        std::fs::write(&path, text)?;
        println!("wrote {path}");
    }
    Ok(())
}
