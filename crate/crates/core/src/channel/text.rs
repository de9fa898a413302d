//! Plain-text channel format, so exact realizations can be replayed by other
//! tools.
//!
//! ```text
//! # any number of comment lines
//! edapnc-channel 1
//! n_t 2
//! n_r 2
//! field complex
//! h_ar
//! 0.1,-0.3 1.2,0.5
//! -0.7,0.0 0.4,2.1
//! h_br
//! ...
//! h_ra
//! ...
//! h_rb
//! ...
//! ```
//!
//! Matrices are row-major, one row per line, entries separated by
//! whitespace. Complex entries are written `re,im`. Numbers use Rust's
//! shortest round-trip formatting, so a write/read cycle is lossless.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix};

use super::{ChannelScalar, ChannelSet, Complex64, Field, Realization};
use crate::{Error, Result};

const MAGIC: &str = "edapnc-channel";
const VERSION: u32 = 1;
const NAMES: [&str; 4] = ["h_ar", "h_br", "h_ra", "h_rb"];

trait TextScalar: ChannelScalar {
    fn write_entry(&self, out: &mut String);
    fn parse_entry(token: &str) -> Option<Self>;
}

impl TextScalar for f64 {
    fn write_entry(&self, out: &mut String) {
        let _ = write!(out, "{self:?}");
    }

    fn parse_entry(token: &str) -> Option<Self> {
        token.parse().ok()
    }
}

impl TextScalar for Complex64 {
    fn write_entry(&self, out: &mut String) {
        let _ = write!(out, "{:?},{:?}", self.re, self.im);
    }

    fn parse_entry(token: &str) -> Option<Self> {
        let (re, im) = token.split_once(',')?;
        Some(Complex::new(re.parse().ok()?, im.parse().ok()?))
    }
}

pub fn write_realization(cs: &Realization) -> String {
    match cs {
        Realization::Real(set) => write_set(set),
        Realization::Complex(set) => write_set(set),
    }
}

fn write_set<T: TextScalar>(set: &ChannelSet<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "n_t {}", set.n_t());
    let _ = writeln!(out, "n_r {}", set.n_r());
    let _ = writeln!(out, "field {}", set.field());
    for (name, h) in NAMES
        .iter()
        .zip([set.h_ar(), set.h_br(), set.h_ra(), set.h_rb()])
    {
        let _ = writeln!(out, "{name}");
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if j > 0 {
                    out.push(' ');
                }
                h[(i, j)].write_entry(&mut out);
            }
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Result<&'a str> {
        for (idx, line) in self.inner.by_ref() {
            self.last = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(line);
        }
        Err(Error::Parse {
            line: self.last + 1,
            message: "unexpected end of input".into(),
        })
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.last,
            message: message.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_content()?;
        match line.split_once(char::is_whitespace) {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => Err(self.error(format!("expected '{key} <value>', found '{line}'"))),
        }
    }

    fn dimension(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.error(format!("bad {key} value '{v}'")))
    }
}

pub fn read_realization(text: &str) -> Result<Realization> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let version = lines.keyed(MAGIC)?;
    if version != VERSION.to_string() {
        return Err(lines.error(format!("unsupported format version '{version}'")));
    }
    let n_t = lines.dimension("n_t")?;
    let n_r = lines.dimension("n_r")?;
    let field: Field = lines
        .keyed("field")?
        .parse()
        .map_err(|e: Error| lines.error(e.to_string()))?;
    match field {
        Field::Real => read_set::<f64>(&mut lines, n_t, n_r).map(Realization::Real),
        Field::Complex => read_set::<Complex64>(&mut lines, n_t, n_r).map(Realization::Complex),
    }
}

fn read_set<T: TextScalar>(lines: &mut Lines<'_>, n_t: usize, n_r: usize) -> Result<ChannelSet<T>> {
    let shapes = [(n_r, n_t), (n_r, n_t), (n_t, n_r), (n_t, n_r)];
    let mut mats = Vec::with_capacity(4);
    for (name, (rows, cols)) in NAMES.iter().zip(shapes) {
        let header = lines.next_content()?;
        if header != *name {
            return Err(lines.error(format!("expected '{name}', found '{header}'")));
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next_content()?;
            let row: Vec<T> = line
                .split_whitespace()
                .map(|tok| {
                    T::parse_entry(tok).ok_or_else(|| lines.error(format!("bad entry '{tok}'")))
                })
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(lines.error(format!(
                    "{name}: expected {cols} entries, found {}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        mats.push(DMatrix::from_row_slice(rows, cols, &entries));
    }
    let h_rb = mats.pop().unwrap();
    let h_ra = mats.pop().unwrap();
    let h_br = mats.pop().unwrap();
    let h_ar = mats.pop().unwrap();
    ChannelSet::new(h_ar, h_br, h_ra, h_rb)
}
