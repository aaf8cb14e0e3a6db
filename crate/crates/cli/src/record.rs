//! Observer writing the metrics stream, timings, snapshots and checkpoints
//! of an optimization run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use csd_core::adapter::AdapterModel;
use csd_core::camera::CameraQuad;
use csd_core::densify::DensifyReport;
use csd_core::gaussian::GaussianCloud;
use csd_core::render::render_with;
use csd_core::render::RenderSettings;
use csd_core::train::{IterationRecord, Observer};
use serde_json::json;

use crate::error::{CliError, Result};
use crate::files::create_dir;
use crate::{ply, png_io, tensors};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const CLOUD_FILE: &str = "cloud.ply";
pub const ADAPTER_FILE: &str = "adapter.bin";
pub const CONFIG_FILE: &str = "config.resolved.toml";

/// Canonical snapshot views: azimuths 0, 90, 180 and 270 at elevation 15°
/// and radius 2.2.
pub fn snapshot_quad(resolution: usize) -> csd_core::Result<CameraQuad> {
    CameraQuad::canonical(15.0, 2.2, 50.0, resolution, resolution)
}

pub struct Recorder {
    dir: PathBuf,
    metrics: BufWriter<File>,
    timing: BufWriter<File>,
    start: Instant,
    snapshot_every: u64,
    checkpoint_every: u64,
    quad: CameraQuad,
    background: [f64; 3],
    settings: RenderSettings,
    /// First output failure; the run is stopped when it happens.
    pub failure: Option<CliError>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

impl Recorder {
    pub fn new(
        dir: &Path,
        snapshot_every: u64,
        checkpoint_every: u64,
        snapshot_resolution: usize,
        background: [f64; 3],
        settings: RenderSettings,
    ) -> Result<Self> {
        create_dir(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics: create(&dir.join(METRICS_FILE))?,
            timing: create(&dir.join(TIMING_FILE))?,
            start: Instant::now(),
            snapshot_every,
            checkpoint_every,
            quad: snapshot_quad(snapshot_resolution)?,
            background,
            settings,
            failure: None,
        })
    }

    fn line(&mut self, value: serde_json::Value) -> Result<()> {
        let path = self.dir.join(METRICS_FILE);
        writeln!(self.metrics, "{value}").map_err(|e| CliError::io(path, e))
    }

    fn record(&mut self, r: &IterationRecord, cloud: &GaussianCloud, adapter: &AdapterModel) -> Result<()> {
        self.line(json!({
            "iter": r.iter,
            "t": r.t,
            "view": r.view,
            "resolution": r.resolution,
            "lambda_term_norm": r.lambda_term_norm,
            "single_term_norm": r.single_term_norm,
            "adapter_loss": r.adapter_loss,
            "gaussians": r.gaussians,
        }))?;
        let wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
        writeln!(self.timing, "{}", json!({ "iter": r.iter, "wall_ms": wall_ms }))
            .map_err(|e| CliError::io(self.dir.join(TIMING_FILE), e))?;
        if self.snapshot_every > 0 && r.iter % self.snapshot_every == 0 {
            self.snapshot(r.iter, cloud)?;
        }
        if self.checkpoint_every > 0 && r.iter % self.checkpoint_every == 0 {
            let dir = self.dir.join("checkpoints");
            write_checkpoint(&dir.join(format!("cloud_{:06}.ply", r.iter)), &dir.join(format!("adapter_{:06}.bin", r.iter)), cloud, adapter)?;
        }
        Ok(())
    }

    pub fn snapshot(&self, iter: u64, cloud: &GaussianCloud) -> Result<()> {
        for cam in &self.quad.cameras {
            let img = render_with(cloud, cam, &self.background, self.settings)?;
            let name = format!("{iter:06}_az{:03}.png", cam.azimuth.rem_euclid(360.0).round() as i64);
            png_io::write_render(&self.dir.join("snapshots").join(name), &img, false)?;
        }
        Ok(())
    }

    /// Flushes the logs and writes the final checkpoint.
    pub fn finish(mut self, cloud: &GaussianCloud, adapter: &AdapterModel) -> Result<()> {
        self.metrics.flush().map_err(|e| CliError::io(self.dir.join(METRICS_FILE), e))?;
        self.timing.flush().map_err(|e| CliError::io(self.dir.join(TIMING_FILE), e))?;
        write_checkpoint(&self.dir.join(CLOUD_FILE), &self.dir.join(ADAPTER_FILE), cloud, adapter)
    }

    fn stash<T>(&mut self, r: Result<T>) -> csd_core::Result<()> {
        match r {
            Ok(_) => Ok(()),
            Err(e) => {
                let msg = e.to_string();
                self.failure.get_or_insert(e);
                Err(csd_core::Error::InvalidParameter(format!("output failed: {msg}")))
            }
        }
    }
}

pub fn write_checkpoint(cloud_path: &Path, adapter_path: &Path, cloud: &GaussianCloud, adapter: &AdapterModel) -> Result<()> {
    ply::write_cloud(cloud_path, cloud)?;
    tensors::write_tensors(adapter_path, &adapter.tensors())
}

impl Observer for Recorder {
    fn on_iteration(&mut self, r: &IterationRecord, cloud: &GaussianCloud, adapter: &AdapterModel) -> csd_core::Result<()> {
        let out = self.record(r, cloud, adapter);
        self.stash(out)
    }

    fn on_densify(&mut self, iter: u64, report: &DensifyReport, _cloud: &GaussianCloud) -> csd_core::Result<()> {
        let out = self.line(json!({
            "event": "densify",
            "iter": iter,
            "cloned": report.cloned,
            "split": report.split,
            "pruned": report.pruned,
            "gaussians": report.sources.len(),
        }));
        self.stash(out)
    }

    fn on_rejected(&mut self, iter: u64, error: &csd_core::Error) {
        let out = self.line(json!({ "event": "rejected", "iter": iter, "error": error.to_string() }));
        let _ = self.stash(out);
    }
}
