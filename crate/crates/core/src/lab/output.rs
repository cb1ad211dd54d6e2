use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{io_err, Result};

/// Git-style content hash: SHA-256 of `blob <len>\0<bytes>`, hex encoded.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Gnuplot-friendly variant of a CSV table; `None` when a field is quoted.
pub fn csv_to_dat(csv: &str) -> Option<String> {
    if csv.contains('"') {
        return None;
    }
    let mut lines = csv.lines();
    let mut s = format!("# {}\n", lines.next()?.replace(',', " "));
    for l in lines {
        s.push_str(&l.replace(',', " "));
        s.push('\n');
    }
    Some(s)
}

/// Files written by a run, plus the key/value notes that go into `manifest.txt`.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String)>,
    notes: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn note(&mut self, key: &str, value: &str) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).map_err(io_err(&path))?;
        self.files.push((name.to_string(), blob_hash(data)));
        Ok(())
    }

    pub fn text(&mut self, name: &str, data: &str) -> Result<()> {
        self.bytes(name, data.as_bytes())
    }

    /// Writes a CSV table and, when possible, its `.dat` twin.
    pub fn csv(&mut self, name: &str, data: &str) -> Result<()> {
        self.text(name, data)?;
        if let Some(dat) = csv_to_dat(data) {
            self.text(&name.replace(".csv", ".dat"), &dat)?;
        }
        Ok(())
    }

    /// Writes `manifest.txt` and returns every path written.
    pub fn finish(self) -> Result<Vec<PathBuf>> {
        let mut s = String::new();
        for (k, v) in &self.notes {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for (name, hash) in &self.files {
            s.push_str(&format!("file.{name} = {hash}\n"));
        }
        let path = self.dir.join("manifest.txt");
        std::fs::write(&path, s).map_err(io_err(&path))?;
        let mut out: Vec<PathBuf> = self.files.iter().map(|(n, _)| self.dir.join(n)).collect();
        out.push(path);
        Ok(out)
    }
}
