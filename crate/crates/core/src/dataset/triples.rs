use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::modifier_tokens;
use crate::error::{Error, Result};

/// Whether a triple is used for training. Every triple is evaluated; training
/// triples show up as seen pairings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleRole {
    #[default]
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub ref_label: String,
    pub modifier: String,
    pub target_label: String,
    pub role: TripleRole,
}

impl Triple {
    pub fn new(
        ref_label: impl Into<String>,
        modifier: impl Into<String>,
        target_label: impl Into<String>,
        role: TripleRole,
    ) -> Result<Self> {
        let t = Triple {
            ref_label: ref_label.into(),
            modifier: modifier.into(),
            target_label: target_label.into(),
            role,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.ref_label.trim().is_empty() || self.target_label.trim().is_empty() {
            return Err(Error::input("triple labels must be non-empty"));
        }
        let n = modifier_tokens(&self.modifier).len();
        if !(1..=2).contains(&n) {
            return Err(Error::input(format!(
                "modifier {:?} must have one or two tokens",
                self.modifier
            )));
        }
        Ok(())
    }

    pub fn is_train(&self) -> bool {
        self.role == TripleRole::Train
    }
}

const HEADER: [&str; 3] = ["ref_label", "modifier", "target_label"];

/// Parses a triples CSV. The header must start with
/// `ref_label,modifier,target_label`; an optional fourth `split` column holds
/// `train` or `test` (rows default to `train` when the column is absent).
pub fn read_triples<R: Read>(reader: R, origin: &Path) -> Result<Vec<Triple>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::format(origin, line, e.to_string())
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let has_split = match headers.len() {
        3 => false,
        4 if &headers[3] == "split" => true,
        _ => {
            return Err(Error::format(
                origin,
                1,
                "expected header ref_label,modifier,target_label[,split]",
            ))
        }
    };
    if headers.iter().take(3).ne(HEADER) {
        return Err(Error::format(
            origin,
            1,
            "expected header ref_label,modifier,target_label[,split]",
        ));
    }
    let width = if has_split { 4 } else { 3 };

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::format(
                origin,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let role = if has_split {
            match &record[3] {
                "train" => TripleRole::Train,
                "test" => TripleRole::Test,
                other => {
                    return Err(Error::format(
                        origin,
                        line,
                        format!("split must be train or test, found {other:?}"),
                    ))
                }
            }
        } else {
            TripleRole::Train
        };
        let triple = Triple::new(&record[0], &record[1], &record[2], role)
            .map_err(|e| Error::format(origin, line, e.to_string()))?;
        out.push(triple);
    }
    Ok(out)
}

pub fn load_triples(path: &Path) -> Result<Vec<Triple>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_triples(file, path)
}

/// Writes triples with the `split` column.
pub fn write_triples<W: Write>(triples: &[Triple], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::input(format!("writing triples: {e}"));
    w.write_record(["ref_label", "modifier", "target_label", "split"])
        .map_err(to_err)?;
    for t in triples {
        let role = match t.role {
            TripleRole::Train => "train",
            TripleRole::Test => "test",
        };
        w.write_record([&t.ref_label, &t.modifier, &t.target_label, role])
            .map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| Error::input(format!("writing triples: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Triple>> {
        read_triples(text.as_bytes(), Path::new("t.csv"))
    }

    #[test]
    fn parses_in_order() {
        let ts = parse("ref_label,modifier,target_label\ngreen,dirty,dirty green\nblue,more vibrant,vibrant blue\n").unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].ref_label, "green");
        assert_eq!(ts[1].modifier, "more vibrant");
        assert!(ts.iter().all(Triple::is_train));
    }

    #[test]
    fn split_column() {
        let ts = parse("ref_label,modifier,target_label,split\na,b,b a,train\nc,d,d c,test\n").unwrap();
        assert_eq!(ts[0].role, TripleRole::Train);
        assert_eq!(ts[1].role, TripleRole::Test);
        assert!(matches!(
            parse("ref_label,modifier,target_label,split\na,b,b a,dev\n"),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn empty_body() {
        assert!(parse("ref_label,modifier,target_label\n").unwrap().is_empty());
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn short_row_reports_line() {
        let err = parse("ref_label,modifier,target_label\ngreen,dirty,dirty green\nred,dark\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
    }

    #[test]
    fn bad_header_and_fields() {
        assert!(parse("a,b,c\nx,y,z\n").is_err());
        assert!(matches!(
            parse("ref_label,modifier,target_label\ngreen,,x\n"),
            Err(Error::Format { line: 2, .. })
        ));
        assert!(parse("ref_label,modifier,target_label\ngreen,a b c,x\n").is_err());
    }

    #[test]
    fn write_then_read() {
        let ts = vec![
            Triple::new("green", "dirty", "dirty green", TripleRole::Train).unwrap(),
            Triple::new("red, dark", "more vibrant", "x", TripleRole::Test).unwrap(),
        ];
        let mut buf = Vec::new();
        write_triples(&ts, &mut buf).unwrap();
        assert_eq!(read_triples(buf.as_slice(), Path::new("mem")).unwrap(), ts);
    }
}
