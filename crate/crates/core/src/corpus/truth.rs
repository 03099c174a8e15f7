//! Dense matrices as CSV with a leading `# rows,cols` comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Writes `m` row-major; values use shortest round-trip formatting.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(out, "# {},{}", m.nrows(), m.ncols()).map_err(io_err)?;
    {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(&mut out);
        for row in m.row_iter() {
            w.write_record(row.iter().map(|x| x.to_string()))
                .map_err(|e| Error::Format {
                    path: path.display().to_string(),
                    msg: e.to_string(),
                })?;
        }
        w.flush().map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a matrix written by [`write_matrix_csv`], checking the declared
/// shape when the header is present.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;

    let declared = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .map(|h| {
            let dims: Vec<Option<usize>> = h.split(',').map(|t| t.trim().parse().ok()).collect();
            match dims.as_slice() {
                [Some(r), Some(c)] => Ok((*r, *c)),
                _ => Err(Error::Format {
                    path: name.clone(),
                    msg: format!("bad shape header `{h}`"),
                }),
            }
        });
    let declared = declared.transpose()?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Format {
            path: name.clone(),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = rec
            .iter()
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: name.clone(),
                    line,
                    msg: format!("invalid number `{t}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }

    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((r, c)) = declared {
        if (r, c) != (rows.len(), ncols) {
            return Err(Error::Format {
                path: name,
                msg: format!("header declares {r}x{c} but data is {}x{ncols}", rows.len()),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
