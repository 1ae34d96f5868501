//! Fingerprint CSV reading and writing.
//!
//! Header: `point_id,true_x,true_y,true_z` followed by
//! `est_x_<name>,est_y_<name>,est_z_<name>` for each technology. Values are
//! decimal meters written in shortest round-trip form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{FingerprintDataset, FingerprintRecord, Position};

const FIXED: [&str; 4] = ["point_id", "true_x", "true_y", "true_z"];

fn parse_header(header: &csv::StringRecord) -> Result<Vec<String>> {
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 7 || fields[..4] != FIXED {
        return Err(Error::invalid(
            "fingerprint header must start with point_id,true_x,true_y,true_z and list at least one technology",
        ));
    }
    let rest = &fields[4..];
    if rest.len() % 3 != 0 {
        return Err(Error::invalid("technology columns must come in x,y,z triples"));
    }
    let mut names = Vec::with_capacity(rest.len() / 3);
    for triple in rest.chunks(3) {
        let name = triple[0]
            .strip_prefix("est_x_")
            .ok_or_else(|| Error::invalid(format!("unexpected column {}", triple[0])))?;
        if name.is_empty()
            || triple[1] != format!("est_y_{name}")
            || triple[2] != format!("est_z_{name}")
        {
            return Err(Error::invalid(format!("malformed columns for technology {name:?}")));
        }
        names.push(name.to_string());
    }
    Ok(names)
}

fn parse_f64(s: &str, what: &str, row: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("row {row}: bad number {s:?} in {what}")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("row {row}: non-finite {what}")));
    }
    Ok(v)
}

pub fn read_fingerprints<R: Read>(reader: R) -> Result<FingerprintDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names = parse_header(rdr.headers()?)?;
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |k: usize| parse_f64(&rec[k], FIXED.get(k).unwrap_or(&"estimate"), row + 2);
        let true_position = Position::new(get(1)?, get(2)?, get(3)?);
        let estimates = (0..names.len())
            .map(|i| {
                let b = 4 + 3 * i;
                Ok(Position::new(get(b)?, get(b + 1)?, get(b + 2)?))
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(FingerprintRecord {
            point_id: rec[0].to_string(),
            true_position,
            estimates,
        });
    }
    FingerprintDataset::new(names, records)
}

pub fn write_fingerprints<W: Write>(dataset: &FingerprintDataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    for name in dataset.technologies() {
        for axis in ["x", "y", "z"] {
            header.push(format!("est_{axis}_{name}"));
        }
    }
    wtr.write_record(&header)?;
    for rec in dataset.records() {
        let mut row = vec![rec.point_id.clone()];
        let p = rec.true_position;
        row.extend([p.x, p.y, p.z].iter().map(f64::to_string));
        for e in &rec.estimates {
            row.extend([e.x, e.y, e.z].iter().map(f64::to_string));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_fingerprints(path: &Path) -> Result<FingerprintDataset> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_fingerprints(std::io::BufReader::new(f))
}

pub fn save_fingerprints(dataset: &FingerprintDataset, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_fingerprints(dataset, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "point_id,true_x,true_y,true_z,est_x_ble,est_y_ble,est_z_ble,est_x_wifi,est_y_wifi,est_z_wifi\n\
                          p0,0.1,0,0,0.3,0,0,0.2,0,0\n\
                          p1,1,0,0,1.25,0,0,0.75,0,0\n";

    #[test]
    fn reads_sample() {
        let ds = read_fingerprints(SAMPLE.as_bytes()).unwrap();
        assert_eq!(ds.technologies(), ["ble", "wifi"]);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[1].estimates[0].x, 1.25);
    }

    #[test]
    fn write_then_read_is_identity() {
        let ds = read_fingerprints(SAMPLE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_fingerprints(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), SAMPLE);
        assert_eq!(read_fingerprints(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn rejects_bad_header() {
        let bad = "id,true_x,true_y,true_z,est_x_a,est_y_a,est_z_a\nq,0,0,0,0,0,0\n";
        assert!(read_fingerprints(bad.as_bytes()).is_err());
        let bad = "point_id,true_x,true_y,true_z,est_x_a,est_y_b,est_z_a\nq,0,0,0,0,0,0\n";
        assert!(read_fingerprints(bad.as_bytes()).is_err());
    }

    #[test]
    fn rejects_bad_numbers() {
        let bad = "point_id,true_x,true_y,true_z,est_x_a,est_y_a,est_z_a\nq,0,0,0,abc,0,0\n";
        assert!(matches!(read_fingerprints(bad.as_bytes()), Err(Error::InvalidInput(_))));
        let bad = "point_id,true_x,true_y,true_z,est_x_a,est_y_a,est_z_a\nq,0,0,0,NaN,0,0\n";
        assert!(read_fingerprints(bad.as_bytes()).is_err());
    }
}
