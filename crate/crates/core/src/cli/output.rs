//! Writing run artifacts.
//!
//! Each run directory holds its CSV files plus `metadata.json`, which carries
//! the config, seeds and library version needed to regenerate them. Nothing
//! time- or host-dependent is recorded, so identical configs give identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Experiment, RunConfig};
use super::experiments::{
    detection_table, fig2_table, fig3_table, fig4_tables, run_detect, run_fig2, run_fig3,
    run_fig4, run_single_design, DesignRun, Table,
};
use crate::error::Result;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The config as recorded in metadata. `output_dir` is dropped since it
/// does not affect results.
fn config_value(cfg: &RunConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(map) = &mut v {
        map.remove("output_dir");
    }
    v
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write(name, &table.to_csv())
    }

    fn finish(mut self, cfg: &RunConfig, extra: Value) -> Result<Vec<PathBuf>> {
        let mut record = json!({
            "tool": TOOL,
            "version": VERSION,
            "experiment": cfg.experiment,
            "config": config_value(cfg),
            "files": self.files,
        });
        if let (Value::Object(map), Value::Object(more)) = (&mut record, extra) {
            map.extend(more);
        }
        let text = to_json(&record);
        self.write("metadata.json", &text)?;
        Ok(self.files.iter().map(|f| self.dir.join(f)).collect())
    }
}

fn write_design(w: &mut Writer, run: &DesignRun) -> Result<Value> {
    w.write("w.csv", &run.w.to_csv())?;
    w.write("w.meta.json", &to_json(&run.w.metadata(Some(run.seed))))?;
    let record = run.metrics.to_record();
    let mut metrics = Table::new(&record.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>());
    metrics.push(record.iter().map(|(_, v)| v.clone()).collect());
    w.table("metrics.csv", &metrics)?;
    w.write("metrics.json", &to_json(&run.metrics))?;
    Ok(json!({
        "calibrated_gamma": run.calibrated_gamma,
        "sparse": run.sparse,
    }))
}

/// Runs the configured experiment and writes its artifacts under `out`.
/// Returns the written paths.
pub fn run_experiment(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut w = Writer::new(out)?;
    let extra = match cfg.experiment {
        Experiment::Fig2 => {
            w.table("fig2.csv", &fig2_table(&run_fig2(cfg)?))?;
            json!({})
        }
        Experiment::Fig3 => {
            w.table("fig3.csv", &fig3_table(&run_fig3(cfg)?))?;
            json!({})
        }
        Experiment::Fig4 => {
            let result = run_fig4(cfg)?;
            let (curve, summary) = fig4_tables(&result);
            w.table("fig4.csv", &curve)?;
            w.table("fig4_summary.csv", &summary)?;
            json!({})
        }
        Experiment::SingleDesign => {
            let run = run_single_design(cfg)?;
            write_design(&mut w, &run)?
        }
        Experiment::Detect => {
            let run = run_detect(cfg)?;
            let extra = write_design(&mut w, &run)?;
            w.table("detection.csv", &detection_table(&run.detection))?;
            extra
        }
    };
    w.finish(cfg, extra)
}
