use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use exb_barrier::config::RunConfig;

use crate::settings;

/// Output directory with the run's config echo.
pub struct OutputDir {
    root: PathBuf,
    echo: String,
}

impl OutputDir {
    /// Creates the directory and proves it is writable before any compute.
    pub fn prepare(cfg: &RunConfig, command: &str) -> Result<Self> {
        let root = cfg.output_dir.clone();
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        let echo = format!("exbctl {command}\n{}", settings::echo(cfg));
        let sidecar = root.join(format!("{command}.config.toml"));
        fs::write(&sidecar, settings::echo(cfg)).with_context(|| format!("writing {}", sidecar.display()))?;
        Ok(Self { root, echo })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Config echo for `#` comment headers.
    pub fn header(&self) -> &str {
        &self.echo
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn write_with<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut w = self.create(name)?;
        body(&mut w)?;
        w.flush()?;
        Ok(self.path(name))
    }
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}
