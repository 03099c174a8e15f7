//! UCI bag-of-words format: three header lines `M`, `V`, `NNZ`, then `NNZ`
//! lines `doc word count`, all 1-indexed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Corpus;
use crate::error::{Error, Result};

fn parse_field<T: std::str::FromStr>(tok: &str, what: &str, path: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("invalid {what} `{tok}`"),
    })
}

/// Parses a bag-of-words stream; `name` labels diagnostics.
pub fn read_bow<R: BufRead>(reader: R, name: &str) -> Result<Corpus> {
    let mut header: Vec<usize> = Vec::with_capacity(3);
    let mut docs: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut n_words = 0usize;
    let mut seen = 0usize;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(name, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if header.len() < 3 {
            const NAMES: [&str; 3] = ["document count", "vocabulary size", "nonzero count"];
            header.push(parse_field(line, NAMES[header.len()], name, lineno)?);
            if header.len() == 3 {
                docs = vec![Vec::new(); header[0]];
                n_words = header[1];
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                path: name.to_string(),
                line: lineno,
                msg: format!("expected `doc word count`, found {} fields", toks.len()),
            });
        }
        let d: usize = parse_field(toks[0], "document id", name, lineno)?;
        let w: usize = parse_field(toks[1], "word id", name, lineno)?;
        let c: u32 = parse_field(toks[2], "count", name, lineno)?;
        if d == 0 || d > docs.len() {
            return Err(Error::Bounds {
                path: name.to_string(),
                line: lineno,
                msg: format!("document id {d} outside 1..={}", docs.len()),
            });
        }
        if w == 0 || w > n_words {
            return Err(Error::Bounds {
                path: name.to_string(),
                line: lineno,
                msg: format!("word id {w} outside 1..={n_words}"),
            });
        }
        docs[d - 1].push((w as u32 - 1, c));
        seen += 1;
    }

    if header.len() < 3 {
        return Err(Error::Format {
            path: name.to_string(),
            msg: "missing header lines".into(),
        });
    }
    if seen != header[2] {
        return Err(Error::Format {
            path: name.to_string(),
            msg: format!(
                "header declares {} entries but {seen} were found",
                header[2]
            ),
        });
    }
    Corpus::from_docs(n_words, docs)
}

/// Reads a bag-of-words file and, optionally, a vocabulary file.
pub fn load_bow(path: impl AsRef<Path>, vocab_path: Option<&Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let corpus = read_bow(BufReader::new(file), &path.display().to_string())?;
    match vocab_path {
        Some(vp) => corpus.with_vocab(load_vocab(vp)?),
        None => Ok(corpus),
    }
}

/// One token per line; trailing whitespace is stripped.
pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| l.trim_end().to_string()).collect())
}

/// Writes the corpus in bag-of-words format, entries ordered by document
/// then word.
pub fn write_bow<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", corpus.num_docs())?;
    writeln!(out, "{}", corpus.num_words())?;
    writeln!(out, "{}", corpus.nnz())?;
    for (d, doc) in corpus.docs().enumerate() {
        for &(w, c) in doc {
            writeln!(out, "{} {} {}", d + 1, w + 1, c)?;
        }
    }
    out.flush()
}

pub fn save_bow(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_bow(corpus, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
