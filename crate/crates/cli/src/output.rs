//! Result persistence: JSON-lines records, CSV tables and BPF1 fields under
//! one output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bopp::energy::SignClass;
use bopp::fields::{write_field, ScalarField};
use bopp::morse::SpectrumReport;
use bopp::optimizer::SolutionRecord;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

/// The serialized form of a [`SolutionRecord`]; the field itself goes to a
/// BPF1 file referenced by `field`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordLine {
    pub experiment: String,
    /// Position of the cell in its sweep, so parallel output can be reordered.
    pub cell: usize,
    pub eps: f64,
    pub c: f64,
    pub lambda: f64,
    pub energy: f64,
    pub constraint: f64,
    pub residual: f64,
    pub grad_norm: f64,
    pub barycenter: [f64; 3],
    pub sign_class: SignClass,
    pub morse_index: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub failure: Option<String>,
    pub energy_monotone: bool,
    pub constraint_dev: f64,
    pub tangency: f64,
    pub spectrum: Option<SpectrumReport>,
    pub field: Option<String>,
    /// Why the record was flagged instead of validated.
    pub flag: Option<String>,
}

impl RecordLine {
    pub fn new(experiment: &str, cell: usize, eps: f64, c: f64, rec: &SolutionRecord) -> Self {
        RecordLine {
            experiment: experiment.to_string(),
            cell,
            eps,
            c,
            lambda: rec.lambda,
            energy: rec.energy,
            constraint: rec.constraint,
            residual: rec.residual,
            grad_norm: rec.grad_norm,
            barycenter: rec.barycenter,
            sign_class: rec.sign_class,
            morse_index: rec.morse_index,
            iterations: rec.iterations,
            converged: rec.converged,
            failure: rec.failure.clone(),
            energy_monotone: rec.trajectory.is_monotone(),
            constraint_dev: rec.trajectory.constraint_dev,
            tangency: rec.trajectory.tangency,
            spectrum: None,
            field: None,
            flag: None,
        }
    }
}

/// Writer for one run directory.
pub struct OutputDir {
    root: PathBuf,
    records: BufWriter<File>,
    flagged: BufWriter<File>,
    counts: (usize, usize),
}

impl OutputDir {
    /// Create the directory, echo the configuration and open the record streams.
    pub fn create(root: &Path, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(root.join("fields"))?;
        fs::write(root.join("config.toml"), cfg.to_toml()?)?;
        let records = BufWriter::new(File::create(root.join("records.jsonl"))?);
        let flagged = BufWriter::new(File::create(root.join("flagged.jsonl"))?);
        Ok(OutputDir { root: root.to_path_buf(), records, flagged, counts: (0, 0) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Store `u` under `fields/` and return its path relative to the root.
    pub fn write_field(&self, name: &str, u: &ScalarField) -> Result<String> {
        let rel = format!("fields/{name}.bpf");
        write_field(self.root.join(&rel), u)?;
        Ok(rel)
    }

    /// Re-check the record invariants; valid records go to `records.jsonl`,
    /// the rest to `flagged.jsonl` with the reason attached.
    pub fn emit(&mut self, mut line: RecordLine, rec: &SolutionRecord, level: f64, tol: f64) -> Result<bool> {
        let verdict = rec.check_invariants(level, tol).and_then(|_| {
            if line.energy_monotone {
                Ok(())
            } else {
                Err("energy increased along the descent".to_string())
            }
        });
        let ok = verdict.is_ok();
        line.flag = verdict.err();
        let out = if ok { &mut self.records } else { &mut self.flagged };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
        if ok {
            self.counts.0 += 1;
        } else {
            self.counts.1 += 1;
        }
        Ok(ok)
    }

    /// `(validated, flagged)` record counts so far.
    pub fn counts(&self) -> (usize, usize) {
        self.counts
    }

    pub fn write_csv<S: Serialize>(&self, name: &str, rows: &[S]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.root.join(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<()> {
        let f = BufWriter::new(File::create(self.root.join(name))?);
        serde_json::to_writer_pretty(f, value)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(usize, usize)> {
        self.records.flush()?;
        self.flagged.flush()?;
        Ok(self.counts)
    }
}
