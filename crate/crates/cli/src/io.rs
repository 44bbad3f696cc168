use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use tablesim::table::{read_corpus, CorpusRecord, Table};

use crate::config::usage;

/// The two ends of a line in a pairs file; other fields pass through.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLine {
    pub anchor_id: String,
    pub target_id: String,
}

/// Pools every corpus file, rejecting ids that repeat across files.
pub fn load_corpus(paths: &[PathBuf]) -> Result<Vec<CorpusRecord>> {
    if paths.is_empty() {
        return Err(usage("no --corpus given"));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in paths {
        let f = File::open(p).with_context(|| format!("opening corpus {}", p.display()))?;
        for rec in read_corpus(BufReader::new(f)).with_context(|| format!("reading corpus {}", p.display()))? {
            if !seen.insert(rec.table.id().to_string()) {
                bail!("table id `{}` appears in more than one corpus file", rec.table.id());
            }
            out.push(rec);
        }
    }
    Ok(out)
}

pub fn load_tables(paths: &[PathBuf]) -> Result<Vec<Table>> {
    Ok(load_corpus(paths)?.into_iter().map(|r| r.table).collect())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Pairs with their raw lines, in file order.
pub fn read_pairs(path: &Path) -> Result<Vec<(PairLine, String)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: PairLine = serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.push((p, line.to_string()));
    }
    Ok(out)
}

/// Anchor ids in first-seen order, each with its targets.
pub fn group_pairs(pairs: &[(PairLine, String)]) -> Vec<(String, Vec<String>)> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (p, _) in pairs {
        let g = groups.entry(&p.anchor_id).or_insert_with(|| {
            order.push(p.anchor_id.clone());
            Vec::new()
        });
        if !g.contains(&p.target_id) {
            g.push(p.target_id.clone());
        }
    }
    order.into_iter().map(|a| {
        let g = groups[a.as_str()].clone();
        (a, g)
    }).collect()
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = impl AsRef<str>>) -> Result<()> {
    let mut w = create(path)?;
    for l in lines {
        writeln!(w, "{}", l.as_ref())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
