use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use nalgebra::DMatrix;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Output sink: a file when a path is given, stdout otherwise.
pub struct Out;

impl Out {
    fn sink(path: Option<PathBuf>) -> io::Result<Box<dyn Write>> {
        Ok(match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    pub fn csv(path: Option<PathBuf>) -> io::Result<csv::Writer<Box<dyn Write>>> {
        Ok(csv::Writer::from_writer(Self::sink(path)?))
    }

    pub fn write_text(path: Option<PathBuf>, text: &str) -> io::Result<()> {
        let mut w = Self::sink(path)?;
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()
    }
}
