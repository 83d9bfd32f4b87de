//! Directory of enrolled templates, one `<subject>__<capture>.irc` file per
//! capture with an optional `.meta` sidecar holding the rotation estimate.

use std::fs::OpenOptions;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::encoding::{CodeLayout, IrisCode};
use crate::error::{Error, Result};
use crate::matching::{align_and_match, MatchConfig, MatchResult};

const SEPARATOR: &str = "__";
const EXTENSION: &str = "irc";

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTemplate {
    pub subject: String,
    pub capture: String,
    pub code: IrisCode,
    pub rotation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub capture: String,
    pub result: MatchResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Scores {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
    /// Pairs whose codes did not overlap enough to compare.
    pub skipped: usize,
}

#[derive(Debug)]
pub struct TemplateStore {
    root: PathBuf,
    templates: Vec<StoredTemplate>,
}

fn check_label(kind: &str, label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && label.len() <= u8::MAX as usize
        && !label.contains(SEPARATOR)
        && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !label.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{kind} label {label:?} must be non-empty [A-Za-z0-9._-] without '__'"
        )))
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

/// Rotation recorded in the sidecar of the code file at `path`, if any.
pub fn read_rotation(path: &Path) -> Result<Option<f64>> {
    let text = match std::fs::read_to_string(meta_path(path)) {
        Ok(t) => t,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    for line in text.lines() {
        if let Some(v) = line.trim().strip_prefix("rotation=") {
            let angle = v
                .trim()
                .parse()
                .map_err(|_| Error::StoreCorrupt(format!("{}: bad rotation {v:?}", meta_path(path).display())))?;
            return Ok(Some(angle));
        }
    }
    Ok(None)
}

/// Records `rotation` next to the code file at `path`; `None` writes nothing.
pub fn write_rotation(path: &Path, rotation: Option<f64>) -> Result<()> {
    if let Some(angle) = rotation {
        std::fs::write(meta_path(path), format!("rotation={angle}\n"))?;
    }
    Ok(())
}

impl TemplateStore {
    /// Opens (creating if needed) the store at `root` and audits every
    /// template file in it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&root)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == EXTENSION));
        paths.sort();
        let mut templates = Vec::with_capacity(paths.len());
        for path in paths {
            let corrupt = |why: String| Error::StoreCorrupt(format!("{}: {why}", path.display()));
            let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| corrupt("non-UTF-8 name".into()))?;
            let (subject, capture) = stem
                .split_once(SEPARATOR)
                .ok_or_else(|| corrupt("name is not <subject>__<capture>".into()))?;
            let code = IrisCode::read(&path).map_err(|e| corrupt(e.to_string()))?;
            if code.subject != subject {
                return Err(corrupt(format!("embedded subject {:?}", code.subject)));
            }
            templates.push(StoredTemplate {
                subject: subject.to_string(),
                capture: capture.to_string(),
                code: code.with_labels(subject, capture),
                rotation: read_rotation(&path)?,
            });
        }
        Ok(Self { root, templates })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn templates(&self) -> &[StoredTemplate] {
        &self.templates
    }

    pub fn path_of(&self, subject: &str, capture: &str) -> PathBuf {
        self.root.join(format!("{subject}{SEPARATOR}{capture}.{EXTENSION}"))
    }

    /// Writes a new template; an existing capture id is never overwritten.
    pub fn enroll(&mut self, subject: &str, capture: &str, code: &IrisCode, rotation: Option<f64>) -> Result<PathBuf> {
        check_label("subject", subject)?;
        check_label("capture", capture)?;
        let code = code.clone().with_labels(subject, capture);
        let path = self.path_of(subject, capture);
        let mut file = match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(Error::AlreadyEnrolled {
                    subject: subject.into(),
                    capture: capture.into(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        file.write_all(&code.to_bytes()?)?;
        file.sync_all()?;
        write_rotation(&path, rotation)?;
        self.templates.push(StoredTemplate {
            subject: subject.into(),
            capture: capture.into(),
            code,
            rotation,
        });
        Ok(path)
    }

    /// Best (lowest distance) match over all captures of `subject`.
    pub fn verify(
        &self,
        subject: &str,
        probe: &IrisCode,
        rotation: Option<f64>,
        layout: &CodeLayout,
        cfg: &MatchConfig,
    ) -> Result<Verification> {
        let mut best: Option<Verification> = None;
        let mut last_err = None;
        let mut seen = false;
        for t in self.templates.iter().filter(|t| t.subject == subject) {
            seen = true;
            match align_and_match(&t.code, t.rotation, probe, rotation, layout, cfg) {
                Ok(m) if best.as_ref().is_none_or(|b| m.hd < b.result.hd) => {
                    best = Some(Verification {
                        capture: t.capture.clone(),
                        result: m,
                    })
                }
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        if !seen {
            return Err(Error::SubjectUnknown(subject.into()));
        }
        best.ok_or_else(|| last_err.expect("a failure when nothing matched"))
    }

    /// Scores every unordered pair; same subject label makes a genuine pair.
    pub fn evaluate(&self, layout: &CodeLayout, cfg: &MatchConfig) -> Scores {
        score_pairs(&self.templates, layout, cfg)
    }
}

pub fn score_pairs(templates: &[StoredTemplate], layout: &CodeLayout, cfg: &MatchConfig) -> Scores {
    let n = templates.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let scored: Vec<Option<(bool, f64)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&templates[i], &templates[j]);
            align_and_match(&a.code, a.rotation, &b.code, b.rotation, layout, cfg)
                .ok()
                .map(|m| (a.subject == b.subject, m.hd))
        })
        .collect();
    let mut scores = Scores::default();
    for s in scored {
        match s {
            Some((true, hd)) => scores.genuine.push(hd),
            Some((false, hd)) => scores.impostor.push(hd),
            None => scores.skipped += 1,
        }
    }
    scores
}
