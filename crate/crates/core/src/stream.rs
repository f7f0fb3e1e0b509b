//! Stream files: one item per line,
//! `src,dst,src_label,dst_label,edge_label,weight,timestamp`.
//! Blank lines and lines starting with `#` are skipped. Timestamps must be
//! non-decreasing.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sketch::EdgeItem;

/// Parses one record. `line` is only used for error messages.
pub fn parse_record(text: &str, line: usize) -> Result<EdgeItem> {
    let err = |message: String| Error::Parse { line, message };
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != 7 {
        return Err(err(format!("expected 7 comma-separated fields, found {}", fields.len())));
    }
    for (name, v) in ["src", "dst"].iter().zip(&fields[..2]) {
        if v.is_empty() {
            return Err(err(format!("{name} is empty")));
        }
    }
    let num = |name: &str, v: &str| -> Result<u64> {
        v.parse().map_err(|_| err(format!("{name} {v:?} is not a non-negative integer")))
    };
    Ok(EdgeItem::new(
        fields[0],
        fields[1],
        fields[2],
        fields[3],
        fields[4],
        num("weight", fields[5])?,
        num("timestamp", fields[6])?,
    ))
}

/// Iterates the items of a stream file, checking timestamp order.
pub struct StreamReader<R> {
    input: R,
    line: usize,
    last_timestamp: Option<u64>,
    buf: String,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(input: R) -> Self {
        StreamReader {
            input,
            line: 0,
            last_timestamp: None,
            buf: String::new(),
        }
    }

    /// Line number of the most recently returned record.
    pub fn line(&self) -> usize {
        self.line
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<EdgeItem>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let item = match parse_record(text, self.line) {
                Ok(item) => item,
                Err(e) => return Some(Err(e)),
            };
            if let Some(prev) = self.last_timestamp {
                if item.timestamp < prev {
                    return Some(Err(Error::Parse {
                        line: self.line,
                        message: format!("timestamp {} precedes previous timestamp {prev}", item.timestamp),
                    }));
                }
            }
            self.last_timestamp = Some(item.timestamp);
            return Some(Ok(item));
        }
    }
}

/// Reads a whole stream into memory.
pub fn read_stream<R: BufRead>(input: R) -> Result<Vec<EdgeItem>> {
    StreamReader::new(input).collect()
}

fn check_field(name: &str, v: &str) -> Result<()> {
    if v.contains([',', '\n', '\r']) || v.trim() != v {
        return Err(Error::InvalidItem(format!("{name} {v:?} cannot be written to a stream file")));
    }
    Ok(())
}

pub fn write_item<W: Write>(out: &mut W, item: &EdgeItem) -> Result<()> {
    for (name, v) in [
        ("src", &item.src),
        ("dst", &item.dst),
        ("src_label", &item.src_label),
        ("dst_label", &item.dst_label),
        ("edge_label", &item.edge_label),
    ] {
        check_field(name, v)?;
    }
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        item.src, item.dst, item.src_label, item.dst_label, item.edge_label, item.weight, item.timestamp
    )?;
    Ok(())
}

pub fn write_stream<'a, W: Write>(out: &mut W, items: impl IntoIterator<Item = &'a EdgeItem>) -> Result<()> {
    for item in items {
        write_item(out, item)?;
    }
    Ok(())
}
