//! Sweep rows, their CSV form and the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rxdsp::Scheme;

pub const CSV_HEADER: [&str; 10] = [
    "scheme",
    "power_dbm",
    "distance_km",
    "window_symbols",
    "discard",
    "snr_db",
    "zeta_db",
    "num_symbols",
    "wall_time_s",
    "seeds",
];

/// One scheme at one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub scheme: Scheme,
    pub power_dbm: f64,
    pub distance_km: f64,
    /// Zero for schemes without windowing.
    pub window_symbols: usize,
    pub discard: usize,
    /// Absent when the point failed.
    pub snr_db: Option<f64>,
    /// Present only for noiseless runs.
    pub zeta_db: Option<f64>,
    pub num_symbols: usize,
    pub wall_time_s: f64,
    pub seeds: Vec<u64>,
}

impl Row {
    /// Rows as written carry values rounded to the CSV precision.
    pub fn rounded(&self) -> Row {
        let r = |v: f64| (v * 1e4).round() / 1e4;
        Row {
            power_dbm: r(self.power_dbm),
            distance_km: r(self.distance_km),
            snr_db: self.snr_db.map(r),
            zeta_db: self.zeta_db.map(r),
            wall_time_s: r(self.wall_time_s),
            ..self.clone()
        }
    }

    fn fields(&self) -> [String; 10] {
        let f = |v: f64| format!("{v:.4}");
        let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
        [
            self.scheme.name().to_string(),
            f(self.power_dbm),
            f(self.distance_km),
            self.window_symbols.to_string(),
            self.discard.to_string(),
            opt(self.snr_db),
            opt(self.zeta_db),
            self.num_symbols.to_string(),
            f(self.wall_time_s),
            self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"),
        ]
    }
}

/// Canonical order: scheme, then distance, then power.
pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.distance_km.total_cmp(&b.distance_km))
            .then(a.power_dbm.total_cmp(&b.power_dbm))
    });
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    /// `(point, message)` for every point that failed.
    pub failures: Vec<(String, String)>,
    /// Points whose stop criterion was not met within the budget.
    pub budget_exhausted: Vec<String>,
}

pub fn to_csv_string(rows: &[Row]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.fields()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Rows without the header, for appending to a partial-results file.
pub fn rows_to_csv_lines(rows: &[Row]) -> String {
    let s = to_csv_string(rows);
    s.split_once('\n').map(|(_, rest)| rest.to_string()).unwrap_or_default()
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::CsvParse {
        line,
        message: message.into(),
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| parse_err(line, format!("bad number {:?} in {}", &rec[k], CSV_HEADER[k])))
        };
        let int = |k: usize| -> Result<usize> {
            rec[k]
                .parse()
                .map_err(|_| parse_err(line, format!("bad integer {:?} in {}", &rec[k], CSV_HEADER[k])))
        };
        let opt = |k: usize| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let scheme = Scheme::parse(&rec[0]).ok_or_else(|| parse_err(line, format!("unknown scheme {:?}", &rec[0])))?;
        let seeds = if rec[9].is_empty() {
            Vec::new()
        } else {
            rec[9]
                .split(';')
                .map(|s| s.parse().map_err(|_| parse_err(line, format!("bad seed {s:?}"))))
                .collect::<Result<_>>()?
        };
        rows.push(Row {
            scheme,
            power_dbm: num(1)?,
            distance_km: num(2)?,
            window_symbols: int(3)?,
            discard: int(4)?,
            snr_db: opt(5)?,
            zeta_db: opt(6)?,
            num_symbols: int(7)?,
            wall_time_s: num(8)?,
            seeds,
        });
    }
    Ok(rows)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the rows in canonical order.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut rows = result.rows.clone();
    sort_rows(&mut rows);
    std::fs::write(path, to_csv_string(&rows)).map_err(|e| io_err(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<Row>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv(&text)
}

/// Sidecar describing how a result file was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub failures: Vec<String>,
    pub budget_exhausted: Vec<String>,
}

pub fn config_hash(config_toml: &str) -> String {
    Sha256::digest(config_toml.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = toml::to_string(manifest).expect("manifest serialises");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(scheme: Scheme, p: f64) -> Row {
        Row {
            scheme,
            power_dbm: p,
            distance_km: 1000.0,
            window_symbols: 512,
            discard: 128,
            snr_db: Some(17.31234),
            zeta_db: None,
            num_symbols: 8192,
            wall_time_s: 0.0,
            seeds: vec![1, 2],
        }
    }

    #[test]
    fn empty_result_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_csv(&SweepResult::default(), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, format!("{}\n", CSV_HEADER.join(",")));
        assert!(read_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn canonical_order_and_format() {
        let rows = vec![row(Scheme::Vao, 2.0), row(Scheme::Edc, 4.0), row(Scheme::Edc, -2.0)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_csv(
            &SweepResult {
                rows,
                ..Default::default()
            },
            &p,
        )
        .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "edc,-2.0000,1000.0000,512,128,17.3123,,8192,0.0000,1;2");
        assert!(lines[2].starts_with("edc,4.0000"));
        assert!(lines[3].starts_with("vao,2.0000"));
    }

    #[test]
    fn parse_errors_carry_line() {
        let bad = format!("{}\nedc,x,1,1,1,,,1,0,1\n", CSV_HEADER.join(","));
        assert!(matches!(parse_csv(&bad), Err(Error::CsvParse { line: 2, .. })));
        assert!(parse_csv("a,b\n").is_err());
    }

    #[test]
    fn manifest_hash_is_stable() {
        assert_eq!(config_hash("x"), config_hash("x"));
        assert_ne!(config_hash("x"), config_hash("y"));
        assert_eq!(config_hash("").len(), 64);
    }

    proptest! {
        #[test]
        fn round_trip(p in -20.0f64..20.0, snr in proptest::option::of(-10.0f64..80.0), z in proptest::option::of(-5.0f64..40.0),
                      n in 0usize..100000, seeds in proptest::collection::vec(0u64..1000, 0..4), s in 0usize..6) {
            let r = Row {
                scheme: Scheme::ALL[s],
                power_dbm: p,
                snr_db: snr,
                zeta_db: z,
                num_symbols: n,
                seeds,
                ..row(Scheme::Edc, 0.0)
            }
            .rounded();
            let back = parse_csv(&to_csv_string(std::slice::from_ref(&r))).unwrap();
            prop_assert_eq!(back, vec![r]);
        }
    }
}
