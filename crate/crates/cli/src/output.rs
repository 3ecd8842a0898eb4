use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use eps_core::dataset::{open_dataset, DatasetHeader, DatasetReader, Manifest, PayloadKind};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// The command's output directory.
#[derive(Debug, Clone)]
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(flag: Option<&Path>, cfg: &mut RunConfig) -> CliResult<Self> {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| cfg.out_dir.clone())
            .ok_or_else(|| CliError::Usage("an output directory is required (--out DIR)".into()))?;
        std::fs::create_dir_all(&dir)?;
        cfg.out_dir = Some(dir.clone());
        Ok(Output { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// `<command>.run.json`: resolved config, seeds, inputs and tool version,
    /// enough to rerun the command.
    pub fn write_run(&self, command: &str, cfg: &RunConfig, inputs: Value) -> CliResult<()> {
        #[derive(Serialize)]
        struct RunManifest<'a> {
            tool: &'a str,
            tool_version: &'a str,
            command: &'a str,
            seed: Option<u64>,
            inputs: Value,
            config: &'a RunConfig,
        }
        let m = RunManifest {
            tool: "epsid",
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.seed,
            inputs,
            config: cfg,
        };
        let text = serde_json::to_string_pretty(&m)? + "\n";
        std::fs::write(self.path(&format!("{command}.run.json")), text)?;
        Ok(())
    }

    pub fn write_json_lines<T: Serialize>(&self, name: &str, rows: &[T]) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut w = std::io::BufWriter::new(File::create(&path)?);
        for r in rows {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// A dataset opened for streaming, with its sidecar manifest if present.
pub struct Input {
    pub header: DatasetHeader,
    pub reader: DatasetReader<BufReader<File>>,
    pub manifest: Option<Manifest>,
}

impl Input {
    pub fn open(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} does not exist", path.display()),
            )));
        }
        let reader = open_dataset(path)?;
        let header = *reader.header();
        let manifest = if Manifest::sidecar_path(path).exists() {
            let m = Manifest::load(path)?;
            m.check(&header, &[])?;
            Some(m)
        } else {
            None
        };
        Ok(Input {
            header,
            reader,
            manifest,
        })
    }

    pub fn require(&self, kind: PayloadKind, what: &str) -> CliResult<()> {
        if self.header.payload_kind != kind {
            return Err(CliError::Usage(format!(
                "{what} needs a {kind:?} dataset, got {:?}",
                self.header.payload_kind
            )));
        }
        Ok(())
    }

    /// Per-record ids from the manifest's synthesis seeds, when it lists them.
    pub fn record_ids(&self) -> Option<Vec<u64>> {
        let m = self.manifest.as_ref()?;
        (m.records.len() == self.header.record_count as usize)
            .then(|| m.records.iter().map(|j| j.impairment_seed).collect())
    }
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Lowercase alphanumerics and dashes, for file names built from labels.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}
