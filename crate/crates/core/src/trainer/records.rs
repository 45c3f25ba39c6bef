//! Time-series CSV of evaluation and training steps.
//!
//! Column order:
//! `timestamp, episode, step, raw_<feature>..., norm_<feature>..., action,
//! setpoint_c, cooling_w, baseline_cooling_w, signal, k_target, reward,
//! control_error, valid`.
//!
//! Timestamps are ISO-8601 without zone, floats use 17 significant digits in
//! exponent form so a read-back reproduces every value exactly and a rewrite
//! is byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use super::metrics::EpisodeRecord;
use super::TrainError;

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
const TAIL: [&str; 9] = [
    "action",
    "setpoint_c",
    "cooling_w",
    "baseline_cooling_w",
    "signal",
    "k_target",
    "reward",
    "control_error",
    "valid",
];

pub fn header(features: &[String]) -> Vec<String> {
    let mut h = vec!["timestamp".to_string(), "episode".into(), "step".into()];
    h.extend(features.iter().map(|f| format!("raw_{f}")));
    h.extend(features.iter().map(|f| format!("norm_{f}")));
    h.extend(TAIL.iter().map(|s| s.to_string()));
    h
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_timeseries<W: Write>(out: W, features: &[String], records: &[EpisodeRecord]) -> Result<(), TrainError> {
    let csv_err = |e: csv::Error| TrainError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(features)).map_err(csv_err)?;
    for r in records {
        if r.raw.len() != features.len() || r.normalized.len() != features.len() {
            return Err(TrainError::Csv(format!(
                "record at {} has {} raw / {} normalized values for {} features",
                r.time,
                r.raw.len(),
                r.normalized.len(),
                features.len()
            )));
        }
        let mut row = vec![r.time.format(TIME_FORMAT).to_string(), r.episode.to_string(), r.step.to_string()];
        row.extend(r.raw.iter().map(|&v| fmt_f64(v)));
        row.extend(r.normalized.iter().map(|&v| fmt_f64(v)));
        for v in [
            r.action,
            r.setpoint_c,
            r.cooling_w,
            r.baseline_cooling_w,
            r.signal,
            r.k_target,
            r.reward,
            r.control_error,
        ] {
            row.push(fmt_f64(v));
        }
        row.push(r.valid.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| TrainError::Csv(e.to_string()))?;
    Ok(())
}

/// Writes `records` to `path`; refuses an empty record set.
pub fn write_timeseries_csv(path: &Path, features: &[String], records: &[EpisodeRecord]) -> Result<(), TrainError> {
    if records.is_empty() {
        return Err(TrainError::Csv("no records to write".into()));
    }
    let file = std::fs::File::create(path).map_err(|e| TrainError::io(path, e))?;
    write_timeseries(std::io::BufWriter::new(file), features, records)
}

/// Parses a time-series CSV back into feature names and records.
pub fn read_timeseries<R: Read>(input: R) -> Result<(Vec<String>, Vec<EpisodeRecord>), TrainError> {
    let mut rd = csv::Reader::from_reader(input);
    let head: Vec<String> = rd
        .headers()
        .map_err(|e| TrainError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let features: Vec<String> = head
        .iter()
        .filter_map(|h| h.strip_prefix("raw_").map(str::to_string))
        .collect();
    if head != header(&features) {
        return Err(TrainError::Csv(format!("unexpected header {head:?}")));
    }
    let n = features.len();
    let mut records = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| TrainError::Csv(e.to_string()))?;
        let cell = |i: usize| -> Result<&str, TrainError> {
            match row.get(i) {
                Some(c) if !c.is_empty() => Ok(c),
                _ => Err(TrainError::Csv(format!("row {}: empty `{}` cell", line + 1, head[i]))),
            }
        };
        let bad = |i: usize| TrainError::Csv(format!("row {}: cannot parse `{}`", line + 1, head[i]));
        let float = |i: usize| cell(i)?.parse::<f64>().map_err(|_| bad(i));
        let int = |i: usize| cell(i)?.parse::<usize>().map_err(|_| bad(i));
        let tail = 3 + 2 * n;
        records.push(EpisodeRecord {
            time: NaiveDateTime::parse_from_str(cell(0)?, TIME_FORMAT).map_err(|_| bad(0))?,
            episode: int(1)?,
            step: int(2)?,
            raw: (3..3 + n).map(float).collect::<Result<_, _>>()?,
            normalized: (3 + n..tail).map(float).collect::<Result<_, _>>()?,
            action: float(tail)?,
            setpoint_c: float(tail + 1)?,
            cooling_w: float(tail + 2)?,
            baseline_cooling_w: float(tail + 3)?,
            signal: float(tail + 4)?,
            k_target: float(tail + 5)?,
            reward: float(tail + 6)?,
            control_error: float(tail + 7)?,
            valid: cell(tail + 8)?.parse::<bool>().map_err(|_| bad(tail + 8))?,
        });
    }
    Ok((features, records))
}

pub fn read_timeseries_csv(path: &Path) -> Result<(Vec<String>, Vec<EpisodeRecord>), TrainError> {
    let file = std::fs::File::open(path).map_err(|e| TrainError::io(path, e))?;
    read_timeseries(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn sample(values: &[f64]) -> Vec<EpisodeRecord> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| EpisodeRecord {
                time: NaiveDate::from_ymd_opt(2023, 8, 1).unwrap().and_hms_opt(8, 0, 0).unwrap()
                    + chrono::Duration::minutes(10 * i as i64),
                episode: 0,
                step: i,
                raw: vec![v, 1.0 / 3.0],
                normalized: vec![v / 7.0, -0.0],
                action: 2.0,
                setpoint_c: 24.5,
                cooling_w: v * 1e4,
                baseline_cooling_w: 1.0e4,
                signal: 0.0,
                k_target: 0.15,
                reward: -v,
                control_error: v - 0.15,
                valid: i % 2 == 0,
            })
            .collect()
    }

    fn names() -> Vec<String> {
        vec!["tout_c".into(), "tin_c".into()]
    }

    #[test]
    fn header_lists_every_field() {
        let h = header(&names());
        assert_eq!(h.len(), 3 + 4 + TAIL.len());
        assert_eq!(h[3], "raw_tout_c");
        assert_eq!(h[6], "norm_tin_c");
        assert_eq!(h.last().unwrap(), "valid");
    }

    #[test]
    fn empty_record_set_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_timeseries_csv(&dir.path().join("x.csv"), &names(), &[]).is_err());
    }

    #[test]
    fn empty_cells_are_reported() {
        let mut buf = Vec::new();
        write_timeseries(&mut buf, &names(), &sample(&[0.5])).unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",true", ",");
        assert!(read_timeseries(text.as_bytes()).unwrap_err().to_string().contains("empty `valid`"));
    }

    proptest! {
        #[test]
        fn rewrite_is_byte_identical(values in proptest::collection::vec(proptest::num::f64::NORMAL, 1..20)) {
            let records = sample(&values);
            let mut first = Vec::new();
            write_timeseries(&mut first, &names(), &records).unwrap();
            let (features, back) = read_timeseries(first.as_slice()).unwrap();
            prop_assert_eq!(&features, &names());
            prop_assert_eq!(&back, &records);
            let mut second = Vec::new();
            write_timeseries(&mut second, &features, &back).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
