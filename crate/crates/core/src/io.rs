//! CSV ingest and export of load-sharing data.

use crate::data::LoadShareData;
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// `system,time_a,time_b[,note]`: failure times of the two components.
    RawComponents,
    /// `[system,]y0,y1,…`: stage gap times, any number of stages.
    StageGaps,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw-components" | "raw_components" => Ok(Self::RawComponents),
            "stage-gaps" | "stage_gaps" => Ok(Self::StageGaps),
            other => Err(Error::Parse(format!("unknown data format `{other}`"))),
        }
    }
}

/// One system's component failure times.
#[derive(Debug, Clone, PartialEq)]
pub struct RawComponentRecord {
    pub system_id: String,
    pub time_a: f64,
    pub time_b: f64,
    pub note: Option<String>,
}

impl RawComponentRecord {
    /// `(min(a, b), |a − b|)`.
    pub fn gaps(&self) -> (f64, f64) {
        (self.time_a.min(self.time_b), (self.time_a - self.time_b).abs())
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_time(field: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {what} `{field}` is not a number")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidData(format!(
            "line {line}: {what} {v} must be positive and finite"
        )));
    }
    Ok(v)
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

pub fn read_raw_records<R: Read>(input: R) -> Result<Vec<RawComponentRecord>> {
    let mut rdr = reader(input);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line_of(&rec);
        if rec.len() < 3 || rec.len() > 4 {
            return Err(Error::Parse(format!(
                "line {line}: expected 3 or 4 fields (system, time_a, time_b[, note]), found {}",
                rec.len()
            )));
        }
        let r = RawComponentRecord {
            system_id: rec[0].to_string(),
            time_a: parse_time(&rec[1], line, "time_a")?,
            time_b: parse_time(&rec[2], line, "time_b")?,
            note: rec.get(3).filter(|s| !s.is_empty()).map(str::to_string),
        };
        if r.time_a == r.time_b {
            return Err(Error::InvalidData(format!(
                "line {line}: system {} has tied failure times ({})",
                r.system_id, r.time_a
            )));
        }
        out.push(r);
    }
    if out.is_empty() {
        return Err(Error::InvalidData("no records".into()));
    }
    Ok(out)
}

pub fn read_raw_components<R: Read>(input: R) -> Result<LoadShareData> {
    let recs = read_raw_records(input)?;
    let (y0, y1) = recs.iter().map(RawComponentRecord::gaps).unzip();
    LoadShareData::from_columns(vec![y0, y1])
}

pub fn read_stage_gaps<R: Read>(input: R) -> Result<LoadShareData> {
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let first = header.get(0).unwrap_or("").to_ascii_lowercase();
    let skip = usize::from(first.starts_with("system") || first == "id");
    let width = header.len();
    if width <= skip {
        return Err(Error::Parse("line 1: header names no stage columns".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line_of(&rec);
        if rec.len() != width {
            return Err(Error::Parse(format!(
                "line {line}: expected {width} fields, found {}",
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .skip(skip)
            .enumerate()
            .map(|(j, f)| parse_time(f, line, &format!("y{j}")))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData("no records".into()));
    }
    LoadShareData::from_rows(&rows)
}

pub fn read<R: Read>(input: R, format: DataFormat) -> Result<LoadShareData> {
    match format {
        DataFormat::RawComponents => read_raw_components(input),
        DataFormat::StageGaps => read_stage_gaps(input),
    }
}

pub fn read_path(path: &Path, format: DataFormat) -> Result<LoadShareData> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read(std::io::BufReader::new(f), format)
}

/// Writes `system,y0,…` with shortest round-trip number formatting.
pub fn write_stage_gaps<W: Write>(data: &LoadShareData, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["system".to_string()];
    header.extend((0..data.components()).map(|j| format!("y{j}")));
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for i in 0..data.n() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(data.row(i).iter().map(|y| y.to_string()));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_row_maps_to_gaps() {
        let d = read_raw_components("system,time_a,time_b\n1,102,65\n2,84,148\n3,88,202\n".as_bytes())
            .unwrap();
        assert_eq!(d.row(0), vec![65.0, 37.0]);
        assert_eq!(d.row(1), vec![84.0, 64.0]);
    }

    #[test]
    fn tie_error_names_system() {
        let e = read_raw_components("system,a,b\n1,1,2\nS7,5,5\n3,2,9\n".as_bytes()).unwrap_err();
        assert!(matches!(&e, Error::InvalidData(m) if m.contains("S7") && m.contains("line 3")), "{e}");
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let e = read_raw_components("system,a,b\n1,1,2\n2,x,3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = read_raw_components("system,a,b\n1,1,2\n2,1\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = read_stage_gaps("y0,y1\n1,2\n1,-2\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn empty_input_has_no_records() {
        for text in ["", "system,a,b\n"] {
            let e = read_raw_components(text.as_bytes()).unwrap_err();
            assert_eq!(e, Error::InvalidData("no records".into()));
        }
    }

    #[test]
    fn stage_gaps_round_trip() {
        let raw = "system,a,b\n1,102.5,65.25\n2,84,148\n3,88,202\n4,1e-3,7\n";
        let d = read_raw_components(raw.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_stage_gaps(&d, &mut buf).unwrap();
        let back = read_stage_gaps(buf.as_slice()).unwrap();
        assert_eq!(back, d);
        let plain = read_stage_gaps("y0,y1,y2\n1,2,3\n4,5,6\n7,8,9\n1,1,1\n".as_bytes()).unwrap();
        assert_eq!(plain.components(), 3);
    }
}
