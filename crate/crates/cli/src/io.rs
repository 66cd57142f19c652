use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use latsent_core::SentimentLabel;

pub fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_string(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_string(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRow {
    pub id: String,
    pub label: SentimentLabel,
    pub alpha: f64,
}

/// `id<TAB>label[<TAB>alpha[...]]`. Extra columns are ignored, so PC
/// annotation files read directly.
pub fn read_labels(path: &Path) -> anyhow::Result<Vec<LabelRow>> {
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let at = || format!("{}:{}", path.display(), idx + 1);
        if cols.len() < 2 {
            bail!("{}: expected `id<TAB>label`", at());
        }
        let label: SentimentLabel = cols[1].parse().with_context(at)?;
        let alpha = match cols.get(2) {
            Some(a) => {
                let a: f64 = a.trim().parse().with_context(|| format!("{}: bad alpha", at()))?;
                if !(0.0..=1.0).contains(&a) {
                    bail!("{}: alpha {a} outside [0, 1]", at());
                }
                a
            }
            None => 1.0,
        };
        if seen.insert(cols[0].to_owned(), ()).is_some() {
            bail!("{}: duplicate id `{}`", at(), cols[0]);
        }
        rows.push(LabelRow {
            id: cols[0].to_owned(),
            label,
            alpha,
        });
    }
    Ok(rows)
}

/// `id<TAB>value` map, e.g. sentence groups.
pub fn read_pairs(path: &Path) -> anyhow::Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((id, value)) = line.split_once('\t') else {
            bail!("{}:{}: expected `id<TAB>value`", path.display(), idx + 1);
        };
        out.insert(id.to_owned(), value.split('\t').next().unwrap_or("").to_owned());
    }
    Ok(out)
}

pub fn read_ids(path: &Path) -> anyhow::Result<Vec<String>> {
    let mut ids = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            ids.push(id.to_owned());
        }
    }
    Ok(ids)
}

pub fn write_ids(path: &Path, ids: &[&str]) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        for id in ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })
}
