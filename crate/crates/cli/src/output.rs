//! Output directory handling: the writer lock, diagnostics CSV and JSON
//! reports.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use plsim_core::bounds::{DiagnosticsSeries, Sample};
use serde::Serialize;

pub const LOCK_NAME: &str = ".plsim.lock";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const REPORTS_JSON: &str = "reports.json";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => Ok(Self {
                root: root.to_path_buf(),
                lock,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "output directory {} is in use by another plsim process (remove {} if it is stale)",
                root.display(),
                lock.display()
            ),
            Err(e) => Err(e).with_context(|| format!("creating lock {}", lock.display())),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

const BASE_COLUMNS: [&str; 3] = ["t", "mass", "l4_fourth"];
const RESERVOIR_COLUMNS: [&str; 3] = ["n_integral", "n_sq_integral", "n_min"];

// `{:e}` prints the shortest representation that parses back exactly
fn cell(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_diagnostics(path: &Path, d: &DiagnosticsSeries) -> Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    if d.reservoir.is_some() {
        header.extend(RESERVOIR_COLUMNS);
    }
    w.write_record(&header)?;
    for i in 0..d.len() {
        let s = d.get(i);
        let mut row = vec![cell(s.t), cell(s.mass), cell(s.l4_fourth)];
        if let Some(r) = s.reservoir {
            row.extend(r.iter().map(|&v| cell(v)));
        }
        w.write_record(&row)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_diagnostics(path: &Path) -> Result<DiagnosticsSeries> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let reservoir = match header.len() {
        3 => false,
        6 => true,
        n => bail!("{}: expected 3 or 6 columns, found {n}", path.display()),
    };
    let expected: Vec<&str> = BASE_COLUMNS
        .iter()
        .chain(if reservoir { &RESERVOIR_COLUMNS[..] } else { &[] })
        .copied()
        .collect();
    ensure!(
        header == expected,
        "{}: unexpected header {header:?}",
        path.display()
    );
    let mut d = DiagnosticsSeries::default();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let v: Vec<f64> = record
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 2))?;
        d.push(Sample {
            t: v[0],
            mass: v[1],
            l4_fourth: v[2],
            reservoir: reservoir.then(|| [v[3], v[4], v[5]]),
        });
    }
    Ok(d)
}
