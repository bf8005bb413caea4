//! Santa Fe physiological recordings (heart rate, respiration force, blood
//! oxygen, sampled at 2 Hz): loading, slicing and the TE-versus-lag run.

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::harness::bench::{run_point, summarize};
use crate::harness::config::RunConfig;
use crate::harness::plot::{LineChart, Series, SeriesPoint};
use crate::harness::results::{CsvSink, ResultRow};
use crate::systems::{Direction, TimeSeriesPair};

pub const SLICE_START: usize = 2350;
pub const SLICE_END: usize = 3550;
pub const TARGET_LAGS: usize = 2;
pub const RESP_TO_HEART: &str = "respiration_to_heart";
pub const HEART_TO_RESP: &str = "heart_to_respiration";

/// Zero-based column of each channel in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SantaFeColumns {
    pub heart: usize,
    pub respiration: usize,
    pub oxygen: usize,
}

impl Default for SantaFeColumns {
    fn default() -> Self {
        Self {
            heart: 0,
            respiration: 1,
            oxygen: 2,
        }
    }
}

impl FromStr for SantaFeColumns {
    type Err = Error;

    /// `heart=0,respiration=1,oxygen=2`, any order, all three required.
    fn from_str(s: &str) -> Result<Self> {
        let (mut h, mut r, mut o) = (None, None, None);
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("column mapping entry '{part}' is not name=index")))?;
            let idx: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad column index '{v}'")))?;
            match k.trim() {
                "heart" => h = Some(idx),
                "respiration" => r = Some(idx),
                "oxygen" => o = Some(idx),
                other => return Err(Error::InvalidParameter(format!("unknown channel '{other}'"))),
            }
        }
        let cols = match (h, r, o) {
            (Some(heart), Some(respiration), Some(oxygen)) => Self { heart, respiration, oxygen },
            _ => return Err(Error::InvalidParameter("mapping needs heart, respiration and oxygen".into())),
        };
        if cols.heart == cols.respiration || cols.heart == cols.oxygen || cols.respiration == cols.oxygen {
            return Err(Error::InvalidParameter("channels must map to distinct columns".into()));
        }
        Ok(cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SantaFeRecord {
    pub heart: Vec<f64>,
    pub respiration: Vec<f64>,
    pub oxygen: Vec<f64>,
}

impl SantaFeRecord {
    pub fn len(&self) -> usize {
        self.heart.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heart.is_empty()
    }

    /// Rows `[start, end)` with every channel standardized to zero mean and
    /// unit (population) variance.
    pub fn slice_standardized(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.len() || start >= end {
            return Err(Error::SeriesTooShort { len: self.len(), needed: end });
        }
        let std = |v: &[f64]| -> Result<Vec<f64>> {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(Error::Numeric("constant channel cannot be standardized".into()));
            }
            let sd = var.sqrt();
            Ok(v.iter().map(|x| (x - mean) / sd).collect())
        };
        Ok(Self {
            heart: std(&self.heart[start..end])?,
            respiration: std(&self.respiration[start..end])?,
            oxygen: std(&self.oxygen[start..end])?,
        })
    }

    /// The analysis window `[2350, 3550)`.
    pub fn analysis_slice(&self) -> Result<Self> {
        self.slice_standardized(SLICE_START, SLICE_END)
    }

    /// `X` = respiration, `Y` = heart rate, so `x_to_y` is respiration → heart.
    pub fn respiration_heart_pair(&self) -> Result<TimeSeriesPair> {
        let col = |v: &[f64]| Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("column shape");
        TimeSeriesPair::new(col(&self.respiration), col(&self.heart))
    }
}

pub fn parse_santa_fe<R: BufRead>(r: R, columns: SantaFeColumns, origin: &str) -> Result<SantaFeRecord> {
    let need = columns.heart.max(columns.respiration).max(columns.oxygen) + 1;
    let mut rec = SantaFeRecord {
        heart: Vec::new(),
        respiration: Vec::new(),
        oxygen: Vec::new(),
    };
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let loc = || format!("{origin}:{}", i + 1);
        if fields.len() < need {
            return Err(Error::parse(loc(), format!("expected at least {need} columns, got {}", fields.len())));
        }
        let get = |c: usize| -> Result<f64> {
            let v: f64 = fields[c]
                .parse()
                .map_err(|_| Error::parse(loc(), format!("column {} is not a number: '{}'", c + 1, fields[c])))?;
            if !v.is_finite() {
                return Err(Error::parse(loc(), format!("column {} is not finite", c + 1)));
            }
            Ok(v)
        };
        rec.heart.push(get(columns.heart)?);
        rec.respiration.push(get(columns.respiration)?);
        rec.oxygen.push(get(columns.oxygen)?);
    }
    if rec.len() < SLICE_END {
        return Err(Error::parse(
            origin,
            format!("record has {} rows, the analysis window needs {SLICE_END}", rec.len()),
        ));
    }
    Ok(rec)
}

pub fn load_santa_fe(path: &Path, columns: SantaFeColumns) -> Result<SantaFeRecord> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_santa_fe(std::io::BufReader::new(file), columns, &path.display().to_string())
}

/// TE(k, ℓ=2) in both directions for `k = 1..=k_max` on an already sliced
/// record. Rows carry `param = k`.
pub fn santa_fe_rows(cfg: &RunConfig, record: &SantaFeRecord, k_max: usize, sink: Option<&CsvSink>) -> Result<Vec<ResultRow>> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let pair = record.respiration_heart_pair()?;
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let mut c = cfg.clone();
        c.k = k;
        c.l = TARGET_LAGS;
        let n = pair.len() - k.max(TARGET_LAGS);
        for (direction, name) in [(Direction::XToY, RESP_TO_HEART), (Direction::YToX, HEART_TO_RESP)] {
            let mut r = run_point(&c, "santafe", k as f64, n, direction, None, |_| Ok(pair.clone()))?;
            for row in &mut r {
                row.direction = name.to_owned();
            }
            if let Some(sink) = sink {
                sink.append(&r)?;
            }
            rows.extend(r);
        }
    }
    Ok(rows)
}

/// Both directions on one chart against the lag `k`.
pub fn santa_fe_chart(rows: &[ResultRow]) -> LineChart {
    let sums = summarize(rows);
    let series = [RESP_TO_HEART, HEART_TO_RESP]
        .iter()
        .map(|d| {
            let mut points: Vec<SeriesPoint> = sums
                .iter()
                .filter(|s| s.direction == *d)
                .map(|s| SeriesPoint { x: s.param, mean: s.mean, std: s.std })
                .collect();
            points.sort_by(|a, b| a.x.total_cmp(&b.x));
            Series { label: d.replace('_', " "), points }
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    LineChart {
        title: format!("Santa Fe, TE(k, ℓ={TARGET_LAGS})"),
        x_label: "source lag k".into(),
        y_label: "transfer entropy (nats)".into(),
        series,
        truth: None,
    }
}

/// Lags at which mean respiration → heart exceeds heart → respiration, and
/// the number of lags compared.
pub fn respiration_dominance(rows: &[ResultRow]) -> (usize, usize) {
    let sums = summarize(rows);
    let mut wins = 0;
    let mut total = 0;
    for a in sums.iter().filter(|s| s.direction == RESP_TO_HEART) {
        if let Some(b) = sums
            .iter()
            .find(|s| s.direction == HEART_TO_RESP && s.param == a.param && s.estimator == a.estimator)
        {
            total += 1;
            if a.mean > b.mean {
                wins += 1;
            }
        }
    }
    (wins, total)
}

/// Loads, slices, estimates, and writes `santafe.csv` and `santafe.svg`.
pub fn run_santa_fe(cfg: &RunConfig, path: &Path, columns: SantaFeColumns, k_max: usize) -> Result<(Vec<ResultRow>, Vec<PathBuf>)> {
    let record = load_santa_fe(path, columns)?.analysis_slice()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let csv = cfg.out_dir.join("santafe.csv");
    let sink = CsvSink::new(&csv);
    let rows = santa_fe_rows(cfg, &record, k_max, Some(&sink))?;
    let svg = cfg.out_dir.join("santafe.svg");
    santa_fe_chart(&rows).write(&svg)?;
    Ok((rows, vec![csv, svg]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_file(rows: usize) -> String {
        let mut s = String::new();
        for i in 0..rows {
            let t = i as f64 * 0.5;
            s.push_str(&format!("{:.3} {:.3} {:.3}\n", 70.0 + (t * 0.3).sin() * 5.0, (t * 1.1).cos() * 1000.0, 95.0 + (i % 7) as f64));
        }
        s
    }

    #[test]
    fn slice_has_expected_length_and_moments() {
        let rec = parse_santa_fe(synthetic_file(4000).as_bytes(), SantaFeColumns::default(), "t").unwrap();
        assert_eq!(rec.len(), 4000);
        let s = rec.analysis_slice().unwrap();
        assert_eq!(s.len(), 1200);
        for ch in [&s.heart, &s.respiration, &s.oxygen] {
            let n = ch.len() as f64;
            let m = ch.iter().sum::<f64>() / n;
            let v = ch.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
        }
        let pair = s.respiration_heart_pair().unwrap();
        assert_eq!(pair.x()[[0, 0]], s.respiration[0]);
        assert_eq!(pair.y()[[0, 0]], s.heart[0]);
    }

    #[test]
    fn column_mapping() {
        let cols: SantaFeColumns = "respiration=0, heart=2, oxygen=1".parse().unwrap();
        assert_eq!(cols, SantaFeColumns { heart: 2, respiration: 0, oxygen: 1 });
        let rec = parse_santa_fe(synthetic_file(3600).as_bytes(), cols, "t").unwrap();
        let plain = parse_santa_fe(synthetic_file(3600).as_bytes(), SantaFeColumns::default(), "t").unwrap();
        assert_eq!(rec.heart, plain.oxygen);
        assert_eq!(rec.respiration, plain.heart);
        assert!("heart=0,respiration=0,oxygen=1".parse::<SantaFeColumns>().is_err());
        assert!("heart=0,respiration=1".parse::<SantaFeColumns>().is_err());
    }

    #[test]
    fn errors() {
        let short = parse_santa_fe(synthetic_file(3000).as_bytes(), SantaFeColumns::default(), "t");
        let short = short.unwrap_err();
        assert!(short.to_string().contains("3000 rows"), "{short}");
        assert_eq!(short.exit_code(), 3);
        let mut bad = synthetic_file(3600);
        bad.push_str("1.0 x 2.0\n");
        let e = parse_santa_fe(bad.as_bytes(), SantaFeColumns::default(), "t").unwrap_err();
        assert!(e.to_string().contains("t:3601"), "{e}");
        let narrow = "1 2\n".repeat(3600);
        assert!(parse_santa_fe(narrow.as_bytes(), SantaFeColumns::default(), "t").is_err());
        let missing = load_santa_fe(Path::new("/nonexistent/b1.txt"), SantaFeColumns::default()).unwrap_err();
        assert_eq!(missing.exit_code(), 3);
    }

    #[test]
    fn dominance_counts_lags() {
        let mk = |dir: &str, k: f64, est: f64| ResultRow {
            system: "santafe".into(),
            n: 1198,
            param: k,
            direction: dir.into(),
            estimator: "c1".into(),
            seed: 0,
            estimate: est,
            truth: None,
            wall_time_s: 0.0,
        };
        let rows = vec![
            mk(RESP_TO_HEART, 1.0, 0.2),
            mk(HEART_TO_RESP, 1.0, 0.1),
            mk(RESP_TO_HEART, 2.0, 0.05),
            mk(HEART_TO_RESP, 2.0, 0.1),
        ];
        assert_eq!(respiration_dominance(&rows), (1, 2));
        let svg = santa_fe_chart(&rows).to_svg().unwrap();
        assert_eq!(svg.matches(r#"class="series""#).count(), 2);
        assert!(!svg.contains(r#"class="truth""#));
    }
}
