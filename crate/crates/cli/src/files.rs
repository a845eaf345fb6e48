//! File formats owned by the command line: atomic writes, evaluation sets and
//! the metrics CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cubegrasp_core::env::GoalTrajectory;
use cubegrasp_core::train::MetricsRow;

use crate::error::{CliError, ErrorCode};

pub const METRICS_VERSION: u32 = 1;
pub const METRICS_COLUMNS: [&str; 5] = ["episode", "return", "actor_loss", "critic_loss", "entropy"];

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new(ErrorCode::Io, format!("cannot read {}: {e}", path.display())))
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::new(ErrorCode::Io, format!("cannot write {}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::new(ErrorCode::Io, format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::new(ErrorCode::Io, format!("cannot create {}: {e}", path.display())))
}

/// An evaluation set: a list of goal-trajectory files, one path per line,
/// relative to the list's directory. `#` starts a comment.
pub fn read_eval_set(list: &Path) -> Result<Vec<(PathBuf, GoalTrajectory)>, CliError> {
    let text = read_text(list)?;
    let dir = list.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let path = dir.join(line);
        let goals = GoalTrajectory::parse(&read_text(&path)?)
            .map_err(|e| CliError::new(ErrorCode::Goals, format!("{}: {e}", path.display())))?;
        out.push((path, goals));
    }
    if out.is_empty() {
        return Err(CliError::new(ErrorCode::EvalSet, format!("{} lists no goal files", list.display())));
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Version line, header, then one row per episode.
pub fn metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>, CliError> {
    let mut out = format!("# cubegrasp-metrics {METRICS_VERSION}\n").into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    let err = |e: csv::Error| CliError::new(ErrorCode::Io, e.to_string());
    w.write_record(METRICS_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            format!("{:?}", r.ret),
            opt(r.actor_loss),
            opt(r.critic_loss),
            opt(r.entropy),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::new(ErrorCode::Io, e.to_string()))?;
    drop(w);
    Ok(out)
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>, CliError> {
    let bad = |m: String| CliError::new(ErrorCode::Io, format!("metrics: {m}"));
    let first = text.lines().next().unwrap_or("");
    let version = first
        .strip_prefix("# cubegrasp-metrics ")
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| CliError::new(ErrorCode::Version, "metrics: missing version line"))?;
    if version > METRICS_VERSION {
        return Err(CliError::new(
            ErrorCode::Version,
            format!("metrics version {version} is newer than supported {METRICS_VERSION}"),
        ));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(METRICS_COLUMNS) {
        return Err(bad(format!("unexpected columns {headers:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
    let maybe = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        rows.push(MetricsRow {
            episode: rec[0].parse().map_err(|e| bad(format!("episode: {e}")))?,
            ret: num(&rec[1])?,
            actor_loss: maybe(&rec[2])?,
            critic_loss: maybe(&rec[3])?,
            entropy: maybe(&rec[4])?,
        });
    }
    Ok(rows)
}
