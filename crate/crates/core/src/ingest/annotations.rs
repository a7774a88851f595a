//! Annotation CSV: header `start_s,end_s,label`, times in seconds.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::types::{parse_label, Annotation, PatternLabel};

pub const HEADER: [&str; 3] = ["start_s", "end_s", "label"];

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("event {index} overlaps the previous event")]
    Overlap { index: usize },
}

fn parse_err(row: usize, message: impl Into<String>) -> AnnotationError {
    AnnotationError::Parse {
        row,
        message: message.into(),
    }
}

/// Parse annotation CSV text. Rows are returned sorted by start time;
/// overlapping events are an error. Row numbers count the header as row 1.
pub fn parse_annotations<R: Read>(input: R) -> Result<Vec<Annotation>, AnnotationError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_err(row, format!("expected 3 fields, got {}", record.len())));
        }
        let time = |field: usize| {
            record[field]
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| parse_err(row, format!("bad time {:?}", &record[field])))
        };
        let (start_s, end_s) = (time(0)?, time(1)?);
        let label = parse_label(&record[2]).map_err(|e| parse_err(row, e.to_string()))?;
        if label == PatternLabel::NonBS {
            return Err(parse_err(row, "non-BS time is implicit and must not be annotated"));
        }
        if start_s < 0.0 || end_s <= start_s {
            return Err(parse_err(row, format!("invalid interval [{start_s}, {end_s}]")));
        }
        events.push(Annotation::new(start_s, end_s, label));
    }
    events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for index in 1..events.len() {
        if events[index].start_s < events[index - 1].end_s {
            return Err(AnnotationError::Overlap { index });
        }
    }
    Ok(events)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>, AnnotationError> {
    parse_annotations(File::open(path)?)
}

/// Times are written with six decimals.
pub fn format_annotations<W: Write>(mut w: W, events: &[Annotation]) -> std::io::Result<()> {
    writeln!(w, "{}", HEADER.join(","))?;
    for ev in events {
        writeln!(w, "{:.6},{:.6},{}", ev.start_s, ev.end_s, ev.label)?;
    }
    Ok(())
}

pub fn write_annotations(path: impl AsRef<Path>, events: &[Annotation]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(File::create(path)?);
    format_annotations(&mut w, events)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Annotation>, AnnotationError> {
        parse_annotations(text.as_bytes())
    }

    #[test]
    fn single_row() {
        let ev = parse("start_s,end_s,label\n0.10,0.25,SB\n").unwrap();
        assert_eq!(ev, vec![Annotation::new(0.10, 0.25, PatternLabel::SB)]);
    }

    #[test]
    fn header_only() {
        assert!(parse("start_s,end_s,label\n").unwrap().is_empty());
    }

    #[test]
    fn rows_are_sorted() {
        let ev = parse("start_s,end_s,label\n1.0,1.5,hs\n0.1,0.2,crs\n").unwrap();
        assert_eq!(ev[0].label, PatternLabel::CRS);
        assert_eq!(ev[1].label, PatternLabel::HS);
    }

    #[test]
    fn overlap_detected() {
        let err = parse("start_s,end_s,label\n0.1,0.3,SB\n0.2,0.4,MB\n").unwrap_err();
        assert!(matches!(err, AnnotationError::Overlap { index: 1 }));
    }

    #[test]
    fn parse_errors_carry_row() {
        let err = parse("start_s,end_s,label\n0.1,0.3,SB\n0.5,abc,MB\n").unwrap_err();
        assert!(matches!(err, AnnotationError::Parse { row: 3, .. }), "{err}");
        let err = parse("start_s,end_s,label\n0.1,0.3,XX\n").unwrap_err();
        assert!(matches!(err, AnnotationError::Parse { row: 2, .. }));
        let err = parse("start_s,end_s,label\n0.5,0.4,SB\n").unwrap_err();
        assert!(matches!(err, AnnotationError::Parse { row: 2, .. }));
        let err = parse("begin,end,label\n").unwrap_err();
        assert!(matches!(err, AnnotationError::Parse { row: 1, .. }));
    }

    #[test]
    fn six_decimal_round_trip() {
        let events = vec![
            Annotation::new(0.123456, 0.2, PatternLabel::SB),
            Annotation::new(1.0, 2.5, PatternLabel::CRS),
        ];
        let mut buf = Vec::new();
        format_annotations(&mut buf, &events).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "start_s,end_s,label\n0.123456,0.200000,SB\n1.000000,2.500000,CRS\n"
        );
        assert_eq!(parse_annotations(buf.as_slice()).unwrap(), events);
    }
}
