//! The run manifest: which artifacts exist in an output directory.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Artifact paths are stored relative to the manifest's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub seed: u64,
    /// Scenario files, one per generated scenario; the first is the default.
    #[serde(default)]
    pub scenarios: Vec<PathBuf>,
    pub demos: Option<PathBuf>,
    pub annotated: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub estimator: Option<PathBuf>,
    pub library: Option<PathBuf>,
    #[serde(skip)]
    pub dir: PathBuf,
}

impl RunManifest {
    pub fn new(dir: &Path, seed: u64) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            seed,
            dir: dir.to_path_buf(),
            ..Self::default()
        }
    }

    /// Accepts either the manifest file or its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|e| CliError::io(&file, e))?;
        let mut m: Self = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", file.display())))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "{}: schema_version {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                file.display(),
                m.schema_version
            )));
        }
        m.dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self) -> Result<PathBuf, CliError> {
        let text = toml::to_string(self).expect("manifest serializes");
        let path = self.dir.join(MANIFEST_FILE);
        write_atomic(&path, |w| w.write_all(text.as_bytes()))?;
        Ok(path)
    }

    /// Resolves a recorded artifact, failing with a hint at the command
    /// that produces it.
    pub fn artifact(&self, field: &Option<PathBuf>, what: &str, producer: &str) -> Result<PathBuf, CliError> {
        let rel = field.as_ref().ok_or_else(|| {
            CliError::Validation(format!(
                "manifest in {} has no {what}; run `skillchain {producer}` first",
                self.dir.display()
            ))
        })?;
        let path = self.dir.join(rel);
        if !path.exists() {
            return Err(CliError::io(
                &path,
                io::Error::new(io::ErrorKind::NotFound, format!("{what} listed in manifest is missing")),
            ));
        }
        Ok(path)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// Writes to a sibling temporary file and renames it into place, so a
/// failed command never leaves a partial output.
pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let result = (|| {
        let mut w = io::BufWriter::new(fs::File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}
