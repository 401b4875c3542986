//! CSV and snapshot emission. All files use `.` decimals, `,` separators,
//! LF line endings and UTF-8; floats are printed in shortest round-trip
//! form so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};

use kmf_core::dynamics::ParticleState;
use kmf_core::experiments::Verdict;
use kmf_core::transport::PointCloud;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Output directory handle carrying the timestamp policy.
pub struct OutputSink {
    dir: PathBuf,
    timestamp: bool,
}

impl OutputSink {
    pub fn new(dir: &Path, timestamp: bool) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            timestamp,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn open(&self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        let path = self.path(name);
        let file = std::fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        let mut w = std::io::BufWriter::new(file);
        if self.timestamp {
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            writeln!(w, "# timestamp: {now}")?;
        }
        Ok(w)
    }

    /// Writes a header line and pre-rendered rows.
    pub fn write_table(&self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut w = self.open(name)?;
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn write_verdicts(&self, name: &str, verdicts: &[Verdict]) -> Result<()> {
        let rows: Vec<String> = verdicts
            .iter()
            .map(|v| {
                format!(
                    "{},{},{},{},{}",
                    v.experiment,
                    fmt_f64(v.theory),
                    fmt_f64(v.measured),
                    fmt_f64(v.threshold),
                    v.pass
                )
            })
            .collect();
        self.write_table(name, "experiment,theory_value,measured,threshold,pass", &rows)
    }

    /// One row per particle, `x_0..x_{d-1}, v_0..v_{d-1}`, with a comment
    /// header carrying `t`, `N` and the seed.
    pub fn write_snapshot(&self, name: &str, state: &ParticleState, seed: u64) -> Result<()> {
        let mut w = self.open(name)?;
        writeln!(
            w,
            "# t={} n={} dim={} seed={seed}",
            fmt_f64(state.t),
            state.n,
            state.dim
        )?;
        let mut header = String::new();
        for k in 0..state.dim {
            let _ = write!(header, "x_{k},");
        }
        for k in 0..state.dim {
            let _ = write!(header, "v_{k}");
            if k + 1 < state.dim {
                header.push(',');
            }
        }
        writeln!(w, "{header}")?;
        for i in 0..state.n {
            let mut row = String::new();
            for c in state.position(i) {
                let _ = write!(row, "{},", fmt_f64(*c));
            }
            let vel = state.velocity(i);
            for (k, c) in vel.iter().enumerate() {
                let _ = write!(row, "{}", fmt_f64(*c));
                if k + 1 < vel.len() {
                    row.push(',');
                }
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Reads a snapshot written by [`OutputSink::write_snapshot`] back into a
/// phase-space cloud.
pub fn read_snapshot(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading snapshot {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = match lines.next() {
        Some(h) => h,
        None => bail!("snapshot {} has no header", path.display()),
    };
    let columns: Vec<&str> = header.split(',').collect();
    let dim = columns.iter().filter(|c| c.starts_with("x_")).count();
    if dim == 0 || columns.len() != 2 * dim {
        bail!(
            "snapshot {} header must be x_0..x_{{d-1}},v_0..v_{{d-1}}",
            path.display()
        );
    }
    let mut data = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for cell in line.split(',') {
            let value: f64 = cell
                .trim()
                .parse()
                .with_context(|| format!("{}: bad number in data row {}", path.display(), ln + 1))?;
            data.push(value);
        }
    }
    if data.is_empty() || data.len() % (2 * dim) != 0 {
        bail!("snapshot {} has ragged rows", path.display());
    }
    Ok(PointCloud::from_rows(2 * dim, data)?)
}
