//! File formats.
//!
//! Sampled signals are comma-separated text: optional `# key=value` metadata
//! lines, a one-line header whose first column is `t`, then one row per
//! sample. Writers always emit the metadata (`subject`, `start_time`, and
//! `rate` or `step`) so files round-trip byte for byte; readers fall back to
//! inferring the timeline from the `t` column when metadata is missing.
//!
//! Events and intervals are JSON lines (`{"t":..}` and
//! `{"start":..,"end":..,"label":..}`). Metric reports are `key=value` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chew::{AccelStream, FeatureMatrix, UniformSignal};
use crate::error::{Error, Result};
use crate::eval::{Confusion, MetricReport};
use crate::signal::{EventSet, InertialRecording, Interval, IntervalSet, ScoreSeries};

/// Allowed deviation of a timestamp from the uniform grid (s).
pub const TIMESTAMP_JITTER: f64 = 1e-6;

pub const INERTIAL_COLUMNS: [&str; 7] = ["t", "ax", "ay", "az", "gx", "gy", "gz"];
pub const ACCEL_COLUMNS: [&str; 4] = ["t", "ax", "ay", "az"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let perm = std::fs::Permissions::from_mode(0o644);
        tmp.as_file().set_permissions(perm).map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Subject id implied by a file name: everything before the first `.`.
pub fn subject_from_path(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.split('.').next().unwrap_or(name).to_string()
}

/// Parsed delimited table with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// 1-based source line of each row.
    pub lines: Vec<usize>,
}

pub fn parse_table(text: &str, path: &Path) -> Result<Table> {
    let mut meta = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if columns.is_none() {
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.trim().split_once('=').ok_or_else(|| {
                    parse_err(path, lineno, 1, "metadata line must be `# key=value`")
                })?;
                meta.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if cols.first().map(String::as_str) != Some("t") {
                return Err(parse_err(
                    path,
                    lineno,
                    1,
                    "header must start with column `t`",
                ));
            }
            columns = Some(cols);
            continue;
        }
        let width = columns.as_ref().map_or(0, Vec::len);
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(parse_err(
                path,
                lineno,
                fields.len().min(width) + 1,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        let row = fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, lineno, c + 1, format!("`{f}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        lines.push(lineno);
    }
    let columns = columns.ok_or_else(|| parse_err(path, 1, 1, "missing header line"))?;
    Ok(Table {
        meta,
        columns,
        rows,
        lines,
    })
}

/// Sample spacing on a uniform timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacing {
    /// `t_k = start + k / rate`.
    Rate(f64),
    /// `t_k = start + k * step`.
    Step(f64),
}

impl Spacing {
    pub fn time(&self, start: f64, k: usize) -> f64 {
        match *self {
            Spacing::Rate(r) => start + k as f64 / r,
            Spacing::Step(s) => start + k as f64 * s,
        }
    }

    pub fn step(&self) -> f64 {
        match *self {
            Spacing::Rate(r) => 1.0 / r,
            Spacing::Step(s) => s,
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            Spacing::Rate(r) => r,
            Spacing::Step(s) => 1.0 / s,
        }
    }
}

impl Table {
    fn meta_f64(&self, key: &str, path: &Path) -> Result<Option<f64>> {
        self.meta
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| parse_err(path, 1, 1, format!("metadata `{key}`: {e}")))
            })
            .transpose()
    }

    /// Rejects non-finite cells, reporting the first offending row.
    fn check_finite(&self) -> Result<()> {
        for (row, line) in self.rows.iter().zip(&self.lines) {
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "line {line}: column `{}` is not finite",
                    self.columns[c]
                )));
            }
        }
        Ok(())
    }

    /// Start time and spacing from metadata (`rate` when `prefer_rate`,
    /// else `step`), or inferred from the `t` column. Timestamps must be
    /// strictly increasing and within [`TIMESTAMP_JITTER`] of the grid.
    pub fn timeline(&self, path: &Path, prefer_rate: bool) -> Result<(f64, Spacing)> {
        self.check_finite()?;
        let t: Vec<f64> = self.rows.iter().map(|r| r[0]).collect();
        if let Some(i) = (1..t.len()).find(|&i| t[i] <= t[i - 1]) {
            return Err(Error::invalid(format!(
                "line {}: timestamp {} does not increase",
                self.lines[i], t[i]
            )));
        }
        let start = match self.meta_f64("start_time", path)? {
            Some(s) => s,
            None => *t
                .first()
                .ok_or_else(|| Error::invalid("table has no rows"))?,
        };
        let spacing = match (self.meta_f64("rate", path)?, self.meta_f64("step", path)?) {
            (Some(r), _) if prefer_rate => Spacing::Rate(r),
            (_, Some(s)) if !prefer_rate => Spacing::Step(s),
            (Some(r), None) => Spacing::Rate(r),
            (None, Some(s)) => Spacing::Step(s),
            (None, None) => {
                if t.len() < 2 {
                    return Err(Error::invalid(
                        "cannot infer sampling rate from fewer than 2 rows",
                    ));
                }
                let step = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
                if prefer_rate {
                    Spacing::Rate(1.0 / step)
                } else {
                    Spacing::Step(step)
                }
            }
            // Both present: the preferred one was taken above.
            (Some(_), Some(_)) => unreachable!(),
        };
        if !(spacing.step().is_finite() && spacing.step() > 0.0) {
            return Err(Error::invalid("sample spacing must be positive"));
        }
        for (k, &tk) in t.iter().enumerate() {
            let want = spacing.time(start, k);
            if (tk - want).abs() > TIMESTAMP_JITTER {
                return Err(Error::invalid(format!(
                    "line {}: timestamp {tk} is off the uniform grid (expected {want})",
                    self.lines[k]
                )));
            }
        }
        Ok((start, spacing))
    }

    fn expect_columns(&self, want: &[&str], path: &Path) -> Result<()> {
        if self
            .columns
            .iter()
            .map(String::as_str)
            .ne(want.iter().copied())
        {
            return Err(parse_err(
                path,
                1,
                1,
                format!(
                    "expected columns {}, found {}",
                    want.join(","),
                    self.columns.join(",")
                ),
            ));
        }
        Ok(())
    }

    fn subject(&self, path: &Path) -> String {
        self.meta
            .get("subject")
            .cloned()
            .unwrap_or_else(|| subject_from_path(path))
    }
}

fn header(out: &mut String, meta: &[(&str, String)], columns: &[&str]) {
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "{}", columns.join(","));
}

fn row(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

pub fn parse_inertial(text: &str, path: &Path) -> Result<InertialRecording> {
    let table = parse_table(text, path)?;
    table.expect_columns(&INERTIAL_COLUMNS, path)?;
    let (start, spacing) = table.timeline(path, true)?;
    let accel = table.rows.iter().map(|r| [r[1], r[2], r[3]]).collect();
    let gyro = table.rows.iter().map(|r| [r[4], r[5], r[6]]).collect();
    InertialRecording::new(table.subject(path), start, spacing.rate(), accel, gyro)
}

pub fn format_inertial(rec: &InertialRecording) -> String {
    let mut out = String::with_capacity(rec.len() * 96);
    header(
        &mut out,
        &[
            ("subject", rec.subject_id.clone()),
            ("start_time", rec.start_time.to_string()),
            ("rate", rec.rate.to_string()),
        ],
        &INERTIAL_COLUMNS,
    );
    for (k, (a, g)) in rec.accel().iter().zip(rec.gyro()).enumerate() {
        row(
            &mut out,
            &[rec.timestamp(k), a[0], a[1], a[2], g[0], g[1], g[2]],
        );
    }
    out
}

pub fn read_inertial(path: &Path) -> Result<InertialRecording> {
    parse_inertial(&read_text(path)?, path)
}

pub fn write_inertial(path: &Path, rec: &InertialRecording) -> Result<()> {
    write_atomic(path, format_inertial(rec).as_bytes())
}

/// Two-column `t,<name>` series with `start_time`/`step` metadata.
pub fn format_score_series(series: &ScoreSeries, column: &str) -> String {
    let mut out = String::with_capacity(series.len() * 32);
    header(
        &mut out,
        &[
            ("start_time", series.start_time.to_string()),
            ("step", series.step.to_string()),
        ],
        &["t", column],
    );
    for (i, v) in series.values().iter().enumerate() {
        row(&mut out, &[series.timestamp(i), *v]);
    }
    out
}

pub fn parse_score_series(text: &str, path: &Path) -> Result<ScoreSeries> {
    let table = parse_table(text, path)?;
    if table.columns.len() != 2 {
        return Err(parse_err(
            path,
            1,
            1,
            "score series needs exactly two columns",
        ));
    }
    if table.rows.is_empty() {
        let start = table.meta_f64("start_time", path)?.unwrap_or(0.0);
        let step = table.meta_f64("step", path)?.unwrap_or(1.0);
        return ScoreSeries::new(start, step, Vec::new());
    }
    let (start, spacing) = table.timeline(path, false)?;
    ScoreSeries::new(
        start,
        spacing.step(),
        table.rows.iter().map(|r| r[1]).collect(),
    )
}

pub fn read_score_series(path: &Path) -> Result<ScoreSeries> {
    parse_score_series(&read_text(path)?, path)
}

pub fn parse_uniform_signal(text: &str, path: &Path) -> Result<UniformSignal> {
    let table = parse_table(text, path)?;
    if table.columns.len() != 2 {
        return Err(parse_err(path, 1, 1, "signal needs exactly two columns"));
    }
    let (start, spacing) = table.timeline(path, true)?;
    UniformSignal::new(
        start,
        spacing.rate(),
        table.rows.iter().map(|r| r[1]).collect(),
    )
}

pub fn format_uniform_signal(sig: &UniformSignal, column: &str) -> String {
    let mut out = String::with_capacity(sig.samples.len() * 32);
    header(
        &mut out,
        &[
            ("start_time", sig.start_time.to_string()),
            ("rate", sig.rate.to_string()),
        ],
        &["t", column],
    );
    for (k, v) in sig.samples.iter().enumerate() {
        row(
            &mut out,
            &[Spacing::Rate(sig.rate).time(sig.start_time, k), *v],
        );
    }
    out
}

pub fn parse_accel(text: &str, path: &Path) -> Result<AccelStream> {
    let table = parse_table(text, path)?;
    let cols: Vec<&str> = table.columns.iter().map(String::as_str).collect();
    if !(cols == ACCEL_COLUMNS || cols == INERTIAL_COLUMNS) {
        return Err(parse_err(
            path,
            1,
            1,
            "accelerometer file needs columns t,ax,ay,az",
        ));
    }
    let (start_time, spacing) = table.timeline(path, true)?;
    Ok(AccelStream {
        start_time,
        rate: spacing.rate(),
        samples: table.rows.iter().map(|r| [r[1], r[2], r[3]]).collect(),
    })
}

pub fn format_accel(accel: &AccelStream) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &[
            ("start_time", accel.start_time.to_string()),
            ("rate", accel.rate.to_string()),
        ],
        &ACCEL_COLUMNS,
    );
    for (k, a) in accel.samples.iter().enumerate() {
        row(
            &mut out,
            &[
                Spacing::Rate(accel.rate).time(accel.start_time, k),
                a[0],
                a[1],
                a[2],
            ],
        );
    }
    out
}

pub fn parse_feature_matrix(text: &str, path: &Path) -> Result<FeatureMatrix> {
    let table = parse_table(text, path)?;
    if table.columns.len() < 2 {
        return Err(parse_err(
            path,
            1,
            1,
            "feature matrix needs at least one feature column",
        ));
    }
    let (start_time, spacing) = table.timeline(path, false)?;
    Ok(FeatureMatrix {
        start_time,
        step: spacing.step(),
        names: table.columns[1..].to_vec(),
        rows: table.rows.iter().map(|r| r[1..].to_vec()).collect(),
    })
}

pub fn format_feature_matrix(fm: &FeatureMatrix) -> String {
    let mut out = String::new();
    let mut cols = vec!["t"];
    cols.extend(fm.names.iter().map(String::as_str));
    header(
        &mut out,
        &[
            ("start_time", fm.start_time.to_string()),
            ("step", fm.step.to_string()),
        ],
        &cols,
    );
    for (i, r) in fm.rows.iter().enumerate() {
        let mut vals = vec![Spacing::Step(fm.step).time(fm.start_time, i)];
        vals.extend(r);
        row(&mut out, &vals);
    }
    out
}

/// Any of the sampled-signal layouts, told apart by header.
#[derive(Debug, Clone, PartialEq)]
pub enum Signals {
    Inertial(InertialRecording),
    Accel(AccelStream),
    Scores(ScoreSeries),
    Uniform(UniformSignal),
    Features(FeatureMatrix),
}

/// Columns that mark a two-column file as a raw signal rather than a
/// one-feature matrix.
pub const RAW_SIGNAL_COLUMNS: [&str; 3] = ["ppg", "audio", "value"];

/// Reads a sampled-signal file and dispatches on its header: 7 inertial
/// columns, 4 accelerometer columns, `t,score`, a raw `t,ppg` / `t,audio` /
/// `t,value` signal, or otherwise a feature matrix.
pub fn read_signals(path: &Path) -> Result<Signals> {
    let text = read_text(path)?;
    let table = parse_table(&text, path)?;
    let cols: Vec<&str> = table.columns.iter().map(String::as_str).collect();
    Ok(if cols == INERTIAL_COLUMNS {
        Signals::Inertial(parse_inertial(&text, path)?)
    } else if cols == ACCEL_COLUMNS {
        Signals::Accel(parse_accel(&text, path)?)
    } else if cols == ["t", "score"] {
        Signals::Scores(parse_score_series(&text, path)?)
    } else if cols.len() == 2 && RAW_SIGNAL_COLUMNS.contains(&cols[1]) {
        Signals::Uniform(parse_uniform_signal(&text, path)?)
    } else {
        Signals::Features(parse_feature_matrix(&text, path)?)
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    t: f64,
}

fn json_err(path: &Path, line: usize, e: serde_json::Error) -> Error {
    parse_err(path, line, e.column(), e.to_string())
}

/// Parses JSON-lines events; input order is free, output is sorted.
pub fn parse_events(text: &str, path: &Path) -> Result<EventSet> {
    let mut ts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: EventLine = serde_json::from_str(line).map_err(|e| json_err(path, i + 1, e))?;
        ts.push(ev.t);
    }
    EventSet::from_unsorted(ts)
}

pub fn format_events(events: &EventSet) -> String {
    let mut out = String::new();
    for t in events.iter() {
        out.push_str(&serde_json::to_string(&EventLine { t }).expect("finite event serializes"));
        out.push('\n');
    }
    out
}

pub fn read_events(path: &Path) -> Result<EventSet> {
    parse_events(&read_text(path)?, path)
}

pub fn write_events(path: &Path, events: &EventSet) -> Result<()> {
    write_atomic(path, format_events(events).as_bytes())
}

pub fn parse_intervals(text: &str, path: &Path) -> Result<IntervalSet> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let iv: Interval = serde_json::from_str(line).map_err(|e| json_err(path, i + 1, e))?;
        out.push(
            Interval::new(iv.start, iv.end, iv.label)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    IntervalSet::new(out)
}

pub fn format_intervals(set: &IntervalSet) -> String {
    let mut out = String::new();
    for iv in set {
        out.push_str(&serde_json::to_string(iv).expect("finite interval serializes"));
        out.push('\n');
    }
    out
}

pub fn read_intervals(path: &Path) -> Result<IntervalSet> {
    parse_intervals(&read_text(path)?, path)
}

pub fn write_intervals(path: &Path, set: &IntervalSet) -> Result<()> {
    write_atomic(path, format_intervals(set).as_bytes())
}

/// `key=value` report. Metric keys follow the usual table headers
/// (`Prec`, `Rec`, `Spec`, `F1`, `Acc`, `Acc_w`, `JI`).
pub fn format_metrics(report: &MetricReport, counts: Option<&Confusion>) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("Prec", report.precision.to_string());
    kv("Rec", report.recall.to_string());
    kv("Spec", report.specificity.to_string());
    kv("F1", report.f1.to_string());
    kv("Acc", report.accuracy.to_string());
    kv("Acc_w", report.weighted_accuracy.to_string());
    kv("JI", report.jaccard.to_string());
    kv("weight_factor", report.weight_factor.to_string());
    kv("undefined", report.undefined.join(","));
    if let Some(c) = counts {
        kv("TP", c.tp.to_string());
        kv("FP", c.fp.to_string());
        kv("FN", c.fn_.to_string());
        if let Some(tn) = c.tn {
            kv("TN", tn.to_string());
        }
    }
    out
}

/// Inverse of [`format_metrics`].
pub fn parse_metrics(text: &str, path: &Path) -> Result<(MetricReport, Option<Confusion>)> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, i + 1, 1, "expected key=value"))?;
        map.insert(k.to_string(), (i + 1, v.to_string()));
    }
    let num = |k: &str| -> Result<Option<f64>> {
        map.get(k)
            .map(|(line, v)| {
                v.parse::<f64>()
                    .map_err(|e| parse_err(path, *line, k.len() + 2, format!("{k}: {e}")))
            })
            .transpose()
    };
    let req = |k: &str| -> Result<f64> {
        num(k)?.ok_or_else(|| parse_err(path, 1, 1, format!("missing key `{k}`")))
    };
    let report = MetricReport {
        precision: req("Prec")?,
        recall: req("Rec")?,
        specificity: req("Spec")?,
        f1: req("F1")?,
        accuracy: req("Acc")?,
        weighted_accuracy: req("Acc_w")?,
        jaccard: req("JI")?,
        weight_factor: req("weight_factor")?,
        undefined: map
            .get("undefined")
            .map(|(_, v)| {
                v.split(',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default(),
    };
    let counts = match (num("TP")?, num("FP")?, num("FN")?) {
        (Some(tp), Some(fp), Some(fn_)) => Some(Confusion {
            tp,
            fp,
            fn_,
            tn: num("TN")?,
        }),
        _ => None,
    };
    Ok((report, counts))
}

/// Serializes records as JSON lines.
pub fn format_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(
            &serde_json::to_string(r).map_err(|e| Error::invalid(format!("serialization: {e}")))?,
        );
        out.push('\n');
    }
    Ok(out)
}

/// Collected output files, written together once every one is ready.
#[derive(Debug, Default)]
pub struct OutputBatch {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputBatch {
    pub fn add(&mut self, path: PathBuf, contents: impl Into<Vec<u8>>) {
        self.files.push((path, contents.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            write_atomic(&path, &bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}
