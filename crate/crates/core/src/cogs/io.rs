use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{LagrError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CogsExample {
    /// Stable id, `<file stem>:<line>`.
    pub id: String,
    pub tokens: Vec<String>,
    pub lf: String,
    /// Third column: `in_distribution`, `primitive`, or a generalization case.
    pub tag: String,
}

impl CogsExample {
    pub fn sentence(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_primitive(&self) -> bool {
        self.tag == "primitive"
    }
}

/// Streaming reader over a three-column TSV file. Malformed lines are
/// skipped, logged and counted.
pub struct CogsReader {
    lines: std::io::Lines<BufReader<File>>,
    path: PathBuf,
    stem: String,
    line_no: usize,
    pub skipped: usize,
}

pub fn read_cogs_tsv(path: &Path) -> Result<CogsReader> {
    let file = File::open(path).map_err(|e| LagrError::io(path, e))?;
    let stem = path
        .file_stem()
        .map_or_else(|| "cogs".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(CogsReader {
        lines: BufReader::new(file).lines(),
        path: path.to_path_buf(),
        stem,
        line_no: 0,
        skipped: 0,
    })
}

impl Iterator for CogsReader {
    type Item = Result<CogsExample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(LagrError::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols[0].trim().is_empty() || cols[1].trim().is_empty() {
                log::warn!(
                    "{}:{}: expected 3 tab-separated columns, found {}; skipped",
                    self.path.display(),
                    self.line_no,
                    cols.len()
                );
                self.skipped += 1;
                continue;
            }
            return Some(Ok(CogsExample {
                id: format!("{}:{}", self.stem, self.line_no),
                tokens: cols[0].split_whitespace().map(str::to_string).collect(),
                lf: cols[1].trim().to_string(),
                tag: cols[2].trim().to_string(),
            }));
        }
    }
}

/// Load a whole file; returns the examples and the number of skipped lines.
pub fn load_cogs(path: &Path) -> Result<(Vec<CogsExample>, usize)> {
    let mut reader = read_cogs_tsv(path)?;
    let examples = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok((examples, reader.skipped))
}

pub fn write_cogs_tsv(path: &Path, examples: &[CogsExample]) -> Result<()> {
    let file = File::create(path).map_err(|e| LagrError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for ex in examples {
        writeln!(w, "{}\t{}\t{}", ex.sentence(), ex.lf, ex.tag).map_err(|e| LagrError::io(path, e))?;
    }
    w.flush().map_err(|e| LagrError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_skips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.tsv");
        let mut text = String::new();
        for i in 0..5 {
            text.push_str(&format!("A cat {i} .\tcat ( x _ 1 )\tin_distribution\n"));
        }
        text.push_str("only two\tcolumns\n");
        text.push_str("Emma slept .\tsleep . agent ( x _ 1 , Emma )\tsubj_to_obj_proper\n");
        std::fs::write(&path, text).unwrap();
        let (ex, skipped) = load_cogs(&path).unwrap();
        assert_eq!(ex.len(), 6);
        assert_eq!(skipped, 1);
        assert_eq!(ex[0].id, "train:1");
        assert_eq!(ex[5].id, "train:7");
        assert_eq!(ex[5].tag, "subj_to_obj_proper");
        assert_eq!(ex[0].tokens.len(), 4);

        let out = dir.path().join("copy.tsv");
        write_cogs_tsv(&out, &ex).unwrap();
        assert_eq!(load_cogs(&out).unwrap().0.len(), 6);
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(read_cogs_tsv(Path::new("/nonexistent/cogs.tsv")).is_err());
    }
}
