//! In-memory artifact sets, committed atomically per file.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use quenchwave::io::fmt_e;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// JSON formatter writing every float as `%.12e`.
struct SciFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_e(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("artifact serializes");
    buf.push(b'\n');
    buf
}

/// Top-level JSON artifact: tool version, exact config echo, then the payload.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: String,
    pub config: &'a serde_json::value::RawValue,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Re-roots every file under `prefix`.
    pub fn extend_under(&mut self, prefix: &Path, other: Artifacts) {
        for (name, bytes) in other.files {
            self.files.push((prefix.join(name), bytes));
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(n, _)| n.as_path())
    }

    /// Writes each file to a temporary sibling, then renames all of them into
    /// place.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut staged = Vec::with_capacity(self.files.len());
        let result = (|| -> Result<()> {
            for (name, bytes) in &self.files {
                let dst = dir.join(name);
                if let Some(parent) = dst.parent() {
                    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
                }
                let mut tmp = dst.clone().into_os_string();
                tmp.push(format!(".tmp{}", std::process::id()));
                let tmp = PathBuf::from(tmp);
                fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
                staged.push((tmp, dst));
            }
            Ok(())
        })();
        if let Err(e) = result {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            return Err(e);
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, dst) in staged {
            fs::rename(&tmp, &dst).with_context(|| format!("renaming {}", tmp.display()))?;
            written.push(dst);
        }
        Ok(written)
    }
}
