//! Joint CSV files (`joint,x,y,z`, meters) and dataset manifests.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{Pose, PoseSpace};

pub const JOINTS_HEADER: &str = "joint,x,y,z";

pub fn read_joints_csv(path: impl AsRef<Path>) -> Result<Pose> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_joints_csv(&text)
}

pub fn write_joints_csv(pose: &Pose, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_joints_csv(pose)).map_err(|e| Error::io(path, e))
}

pub fn format_joints_csv(pose: &Pose) -> String {
    let mut out = String::from(JOINTS_HEADER);
    out.push('\n');
    for (name, j) in pose.joint_names.iter().zip(&pose.joints) {
        out.push_str(&format!("{name},{},{},{}\n", j[0], j[1], j[2]));
    }
    out
}

pub fn parse_joints_csv(text: &str) -> Result<Pose> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some(h) if h.replace(' ', "") == JOINTS_HEADER => {}
        _ => return Err(Error::format("joint CSV", format!("expected header `{JOINTS_HEADER}`"))),
    }
    let mut names = Vec::new();
    let mut joints = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::format(
                "joint CSV",
                format!("row {} has {} fields", lineno + 2, fields.len()),
            ));
        }
        let mut xyz = [0.0; 3];
        for (c, f) in xyz.iter_mut().zip(&fields[1..]) {
            *c = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format("joint CSV", format!("bad coordinate `{f}`")))?;
        }
        names.push(fields[0].to_owned());
        joints.push(xyz);
    }
    if joints.is_empty() {
        return Err(Error::format("joint CSV", "no joints"));
    }
    Pose::new(joints, names, PoseSpace::Camera)
}

/// One `depth_path,joints_path` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub depth: PathBuf,
    pub joints: PathBuf,
}

/// Reads a manifest; relative paths resolve against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (d, j) = line.split_once(',').ok_or_else(|| {
            Error::format("manifest", format!("line {} lacks a comma", lineno + 1))
        })?;
        out.push(ManifestEntry {
            depth: base.join(d.trim()),
            joints: base.join(j.trim()),
        });
    }
    Ok(out)
}

pub fn write_manifest(entries: &[(String, String)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text: String = entries.iter().map(|(d, j)| format!("{d},{j}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
