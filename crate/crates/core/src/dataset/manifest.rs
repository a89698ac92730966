use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One image of the corpus. Relative paths are resolved against the
/// manifest's directory when loaded from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub user_id: String,
    pub image_path: PathBuf,
    #[serde(default, with = "optional_path")]
    pub mask_path: Option<PathBuf>,
    #[serde(default, deserialize_with = "optional_f64")]
    pub distance_m: Option<f64>,
}

mod optional_path {
    use std::path::PathBuf;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<PathBuf>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(p) => s.serialize_str(&p.to_string_lossy()),
            None => s.serialize_str(""),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<PathBuf>, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s.trim().is_empty() { None } else { Some(PathBuf::from(s.trim())) })
    }
}

fn optional_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    let s = String::deserialize(d)?;
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(serde::de::Error::custom)
}

/// The list of corpus images, in file order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_HEADER: [&str; 4] = ["user_id", "image_path", "mask_path", "distance_m"];

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let manifest = Manifest { entries };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (row, e) in self.entries.iter().enumerate() {
            if e.user_id.trim().is_empty() {
                return Err(Error::format(format!("manifest row {}", row + 1), "empty user_id"));
            }
            if !seen.insert(&e.image_path) {
                return Err(Error::format(
                    format!("manifest row {}", row + 1),
                    format!("duplicate image path {}", e.image_path.display()),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct user ids in sorted order.
    pub fn users(&self) -> Vec<String> {
        let mut users: Vec<String> = self.entries.iter().map(|e| e.user_id.clone()).collect();
        users.sort();
        users.dedup();
        users
    }

    pub fn from_reader<R: std::io::Read>(reader: R, base_dir: Option<&Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let found: Vec<&str> = headers.iter().collect();
        if found != MANIFEST_HEADER {
            return Err(Error::format(
                "manifest header",
                format!("expected {}, found {}", MANIFEST_HEADER.join(","), found.join(",")),
            ));
        }
        let mut entries = Vec::new();
        for record in rdr.deserialize() {
            let mut entry: ManifestEntry = record?;
            if let Some(base) = base_dir {
                if entry.image_path.is_relative() {
                    entry.image_path = base.join(&entry.image_path);
                }
                if let Some(mask) = entry.mask_path.as_mut() {
                    if mask.is_relative() {
                        *mask = base.join(&*mask);
                    }
                }
            }
            entries.push(entry);
        }
        Manifest::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Manifest::from_reader(file, path.parent())
    }

    pub fn to_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(MANIFEST_HEADER)?;
        for e in &self.entries {
            wtr.write_record([
                e.user_id.clone(),
                e.image_path.to_string_lossy().into_owned(),
                e.mask_path
                    .as_ref()
                    .map(|p| p.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                e.distance_m.map(|d| d.to_string()).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_optional_columns() {
        let text = "user_id,image_path,mask_path,distance_m\nu1,a.pgm,,4\nu2,b.pgm,b_mask.pgm,\n";
        let m = Manifest::from_reader(text.as_bytes(), Some(Path::new("/data"))).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries[0].image_path, PathBuf::from("/data/a.pgm"));
        assert_eq!(m.entries[0].mask_path, None);
        assert_eq!(m.entries[0].distance_m, Some(4.0));
        assert_eq!(m.entries[1].mask_path, Some(PathBuf::from("/data/b_mask.pgm")));
        assert_eq!(m.users(), vec!["u1", "u2"]);
    }

    #[test]
    fn rejects_bad_header_and_duplicates() {
        assert!(Manifest::from_reader("user,image\nu,a\n".as_bytes(), None).is_err());
        let dup = "user_id,image_path,mask_path,distance_m\nu1,a.pgm,,\nu2,a.pgm,,\n";
        assert!(Manifest::from_reader(dup.as_bytes(), None).is_err());
        let blank = "user_id,image_path,mask_path,distance_m\n ,a.pgm,,\n";
        assert!(Manifest::from_reader(blank.as_bytes(), None).is_err());
    }

    #[test]
    fn write_read_round_trip() {
        let m = Manifest::new(vec![ManifestEntry {
            user_id: "u1".into(),
            image_path: "x.pgm".into(),
            mask_path: None,
            distance_m: Some(5.0),
        }])
        .unwrap();
        let mut buf = Vec::new();
        m.to_writer(&mut buf).unwrap();
        assert_eq!(Manifest::from_reader(buf.as_slice(), None).unwrap(), m);
    }
}
