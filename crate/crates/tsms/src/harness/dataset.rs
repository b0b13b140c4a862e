//! Plain-column dataset ingestion.

use crate::error::{Result, TsmsError};
use crate::series::{TimeSeries, MIN_SERIES_LEN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Series longer than this are cut to a seeded random contiguous slice.
pub const MAX_SERIES_LEN: usize = 500;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Load a one-value-per-line CSV column.
///
/// A single non-numeric first line is treated as a header. Series shorter
/// than [`MIN_SERIES_LEN`] are rejected; series longer than
/// [`MAX_SERIES_LEN`] are cut to a contiguous slice whose offset is drawn
/// from `seed` combined with the file name, so reruns see the same data.
pub fn load_dataset_csv(path: &Path, seed: u64) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(TsmsError::ParseError {
                    line: lineno + 1,
                    message: format!("non-finite value {line:?}"),
                })
            }
            Err(_) if lineno == 0 && values.is_empty() => {} // header
            Err(_) => {
                return Err(TsmsError::ParseError {
                    line: lineno + 1,
                    message: format!("not a number: {line:?}"),
                })
            }
        }
    }
    if values.len() < MIN_SERIES_LEN {
        return Err(TsmsError::SeriesTooShort {
            len: values.len(),
            min: MIN_SERIES_LEN,
        });
    }
    if values.len() > MAX_SERIES_LEN {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ fnv1a(path.to_string_lossy().as_bytes()));
        let offset = rng.gen_range(0..=values.len() - MAX_SERIES_LEN);
        values = values[offset..offset + MAX_SERIES_LEN].to_vec();
    }
    TimeSeries::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, lines: &[String]) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn long_series_is_cut_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<String> = (0..600).map(|i| format!("{}", i as f64 * 0.5)).collect();
        let path = write_file(&dir, "long.csv", &lines);
        let a = load_dataset_csv(&path, 42).unwrap();
        let b = load_dataset_csv(&path, 42).unwrap();
        assert_eq!(a.len(), 500);
        assert_eq!(a.values(), b.values());
        // The slice is contiguous in the source.
        let start = (a.values()[0] / 0.5) as usize;
        assert_eq!(a.values()[499], (start + 499) as f64 * 0.5);
    }

    #[test]
    fn exact_250_unchanged_and_header_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines = vec!["value".to_string()];
        lines.extend((0..250).map(|i| format!("{i}")));
        let path = write_file(&dir, "ok.csv", &lines);
        let s = load_dataset_csv(&path, 0).unwrap();
        assert_eq!(s.len(), 250);
        assert_eq!(s.values()[0], 0.0);
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let lines = vec!["1.0".into(), "2.0".into(), "abc".into()];
        let path = write_file(&dir, "bad.csv", &lines);
        assert!(matches!(
            load_dataset_csv(&path, 0),
            Err(TsmsError::ParseError { line: 3, .. })
        ));
    }

    #[test]
    fn short_series_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<String> = (0..249).map(|i| format!("{i}")).collect();
        let path = write_file(&dir, "short.csv", &lines);
        assert!(matches!(
            load_dataset_csv(&path, 0),
            Err(TsmsError::SeriesTooShort { len: 249, min: 250 })
        ));
    }
}
