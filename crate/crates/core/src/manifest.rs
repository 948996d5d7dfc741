//! Run manifest: config hash, seeds, crate version and a SHA-256 line per
//! artifact file, sorted by relative path.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{hex_digest, ExperimentConfig};
use crate::error::{Error, Result};
use crate::io::format_err;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
    /// `(relative path, sha256)` sorted by path.
    pub files: Vec<(String, String)>,
}

/// Every regular file below `root` except the manifest itself, as sorted
/// `/`-separated relative paths.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in rd {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            let ft = entry.file_type().map_err(|e| Error::io(&path, e))?;
            if ft.is_dir() {
                walk(root, &path, out)?;
            } else if ft.is_file() {
                let rel = path.strip_prefix(root).expect("walked below root");
                let rel: Vec<_> = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                let rel = rel.join("/");
                if rel != MANIFEST_FILE {
                    out.push(rel);
                }
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

impl Manifest {
    pub fn build(root: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let entries = vec![
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("config_hash".to_string(), cfg.hash()),
            ("seed.train".to_string(), cfg.seeds.train.to_string()),
            ("seed.validation".to_string(), cfg.seeds.validation.to_string()),
            ("seed.portfolio".to_string(), cfg.seeds.portfolio.to_string()),
        ];
        let files = list_files(root)?
            .into_iter()
            .map(|rel| {
                let h = hash_file(&root.join(&rel))?;
                Ok((rel, h))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries, files })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push('\n');
        for (rel, h) in &self.files {
            s.push_str(&format!("{h}  {rel}\n"));
        }
        s
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let path = root.join(MANIFEST_FILE);
        fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let (head, body) = text
            .split_once("\n\n")
            .ok_or_else(|| format_err(&path, 1, "missing blank line after header"))?;
        let mut entries = Vec::new();
        for (n, line) in head.lines().enumerate() {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| format_err(&path, n + 1, "expected `key = value`"))?;
            entries.push((k.to_string(), v.to_string()));
        }
        let offset = head.lines().count() + 2;
        let mut files = Vec::new();
        for (n, line) in body.lines().enumerate() {
            let (h, rel) = line
                .split_once("  ")
                .ok_or_else(|| format_err(&path, offset + n, "expected `<sha256>  <path>`"))?;
            files.push((rel.to_string(), h.to_string()));
        }
        Ok(Self { entries, files })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Problems found by [`verify`]; empty when the directory matches its
/// manifest exactly.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Verification {
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    pub unlisted: Vec<String>,
}

impl Verification {
    pub fn is_ok(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.unlisted.is_empty()
    }
}

pub fn verify(root: &Path) -> Result<Verification> {
    let m = Manifest::read(root)?;
    let present = list_files(root)?;
    let mut v = Verification::default();
    for (rel, h) in &m.files {
        let p = root.join(rel);
        if !p.is_file() {
            v.missing.push(rel.clone());
        } else if &hash_file(&p)? != h {
            v.mismatched.push(rel.clone());
        }
    }
    for rel in present {
        if !m.files.iter().any(|(r, _)| *r == rel) {
            v.unlisted.push(rel);
        }
    }
    Ok(v)
}
