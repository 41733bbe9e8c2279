//! Run manifests: a `key=value` record of what a command was asked to do.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Command-line arguments exactly as received.
    pub args: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started: SystemTime,
    pub duration: Duration,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!("command={}\ntool_version={}\n", self.command, self.tool_version);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed={seed}");
        }
        for input in &self.inputs {
            let _ = writeln!(out, "input={}", input.display());
        }
        for arg in &self.args {
            let _ = writeln!(out, "arg={arg}");
        }
        let started = self.started.duration_since(UNIX_EPOCH).unwrap_or_default();
        let _ = writeln!(out, "started_unix={}", started.as_secs());
        let _ = writeln!(out, "duration_secs={:.6}", self.duration.as_secs_f64());
        out
    }
}

/// `<file>.manifest` next to `output`.
pub fn default_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_text() {
        let m = RunManifest {
            command: "build".into(),
            args: vec!["openpatch".into(), "build".into(), "--keep-ratio".into(), "0.20".into()],
            inputs: vec![PathBuf::from("support.opbk")],
            seed: Some(3),
            tool_version: "0.1.0".into(),
            started: UNIX_EPOCH + Duration::from_secs(100),
            duration: Duration::from_millis(1500),
        };
        assert_eq!(
            m.to_text(),
            "command=build\ntool_version=0.1.0\nseed=3\ninput=support.opbk\narg=openpatch\narg=build\n\
             arg=--keep-ratio\narg=0.20\nstarted_unix=100\nduration_secs=1.500000\n"
        );
        assert_eq!(default_path(Path::new("out/bank.opbk")), PathBuf::from("out/bank.opbk.manifest"));
    }
}
