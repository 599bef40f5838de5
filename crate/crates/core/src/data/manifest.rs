use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    CrossValidation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::CrossValidation, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::CrossValidation => "cv",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "cv" => Ok(Partition::CrossValidation),
            "test" => Ok(Partition::Test),
            other => Err(Error::data(format!("unknown partition {other:?} (train, cv, test)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub partition: Partition,
    pub image: PathBuf,
    pub label: PathBuf,
}

/// Image/label pairs with their partition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Parses `partition image label` lines (`#` comments). Relative paths
    /// are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::data(format!(
                    "manifest line {}: expected `partition image label`: {raw:?}",
                    number + 1
                )));
            }
            entries.push(ManifestEntry {
                partition: fields[0].parse()?,
                image: base.join(fields[1]),
                label: base.join(fields[2]),
            });
        }
        let manifest = DatasetManifest { entries };
        manifest.check_unique()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DatasetManifest::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Serializes with paths written relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut out = String::from("# partition image label\n");
        for e in &self.entries {
            out.push_str(&format!("{} {} {}\n", e.partition, rel(&e.image), rel(&e.label)));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        std::fs::write(path, self.to_text(base)).map_err(|e| Error::io(path, e))
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            for p in [&e.image, &e.label] {
                if !seen.insert(p) {
                    return Err(Error::data(format!("path {} listed twice", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn partition(&self, partition: Partition) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.partition == partition)
    }

    pub fn count(&self, partition: Partition) -> usize {
        self.partition(partition).count()
    }

    /// Training needs every partition populated.
    pub fn check_for_training(&self) -> Result<()> {
        for p in Partition::ALL {
            if self.count(p) == 0 {
                return Err(Error::data(format!("manifest has no {p} entries")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let text = "# comment\ntrain a.png la.png\ncv b.png lb.png\n\ntest c.png lc.png # x\n";
        let m = DatasetManifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.entries[0].image, PathBuf::from("/data/a.png"));
        assert_eq!(m.entries[1].partition, Partition::CrossValidation);
        m.check_for_training().unwrap();
        let again = DatasetManifest::parse(&m.to_text(Path::new("/data")), Path::new("/data")).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_lines() {
        let base = Path::new("");
        assert!(DatasetManifest::parse("val a b", base).is_err());
        assert!(DatasetManifest::parse("train a", base).is_err());
        assert!(DatasetManifest::parse("train a b\ntest a c", base).is_err());
        let m = DatasetManifest::parse("train a b\ntest c d", base).unwrap();
        assert!(matches!(m.check_for_training(), Err(Error::Data(_))));
    }
}
