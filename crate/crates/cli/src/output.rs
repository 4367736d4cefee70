use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::fail::Outcome;

pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

/// An output directory. Files are written under a temporary name and renamed
/// into place once complete.
pub struct OutDir {
    pub path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Outcome<Self> {
        std::fs::create_dir_all(path)?;
        Ok(Self {
            path: path.to_path_buf(),
        })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write<F>(&self, name: &str, body: F) -> Outcome<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Outcome<()>,
    {
        let dest = self.file(name);
        let tmp = self.file(&format!(".{name}.tmp"));
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            body(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, &dest)?;
        Ok(dest)
    }

    pub fn write_str(&self, name: &str, text: &str) -> Outcome<PathBuf> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Stores `cfg` with `outputs.dir` pointing here.
    pub fn write_effective_config(&self, cfg: &RunConfig) -> Outcome<()> {
        let mut cfg = cfg.clone();
        cfg.outputs.dir = self.path.canonicalize()?;
        self.write_str(EFFECTIVE_CONFIG, &cfg.to_toml())?;
        Ok(())
    }
}
