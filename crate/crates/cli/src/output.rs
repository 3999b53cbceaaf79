use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::Context;

pub fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// CSV text from a header and rows of displayable cells.
pub fn csv<R, C>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = Vec<C>>,
    C: Display,
{
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn json(dir: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, "summary.json", text)
}
