use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// A computed value; never affects the exit code.
    Info,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs_digest: String,
    pub checks: Vec<Check>,
    pub seed: Option<u64>,
    pub version: String,
}

/// SHA-256 over length-prefixed parts, so that part boundaries are unambiguous.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    format!("sha256:{:x}", h.finalize())
}

impl RunReport {
    pub fn new(command: impl Into<String>, inputs_digest: String, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            inputs_digest,
            checks: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, status: Status, witness: impl Into<String>) {
        self.checks.push(Check { name: name.into(), status, witness: witness.into() });
    }

    pub fn check(&mut self, name: impl Into<String>, result: Result<String, String>) {
        match result {
            Ok(w) => self.push(name, Status::Pass, w),
            Err(w) => self.push(name, Status::Fail, w),
        }
    }

    pub fn info(&mut self, name: impl Into<String>, witness: impl Into<String>) {
        self.push(name, Status::Info, witness);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let seed = self.seed.map_or_else(|| "-".to_string(), |x| x.to_string());
        let _ = writeln!(s, "command  {}", self.command);
        let _ = writeln!(s, "inputs   {}", self.inputs_digest);
        let _ = writeln!(s, "seed     {seed}");
        let _ = writeln!(s, "version  {}", self.version);
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {}", c.status.label(), c.name, c.witness);
        }
        let (pass, fail) = self.checks.iter().fold((0, 0), |(p, f), c| match c.status {
            Status::Pass => (p + 1, f),
            Status::Fail => (p, f + 1),
            Status::Info => (p, f),
        });
        let _ = writeln!(s, "{pass} passed, {fail} failed");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_separates_parts() {
        assert_ne!(digest(&[b"ab", b"c"]), digest(&[b"a", b"bc"]));
        assert_eq!(digest(&[b"x"]), digest(&[b"x"]));
    }

    #[test]
    fn text_and_json_agree_on_statuses() {
        let mut r = RunReport::new("check demo", digest(&[b"demo"]), Some(3));
        r.check("one", Ok("w1".into()));
        r.check("two", Err("w2".into()));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["checks"][1]["status"], "fail");
        assert!(r.to_text().contains("[FAIL] two: w2"));
        assert!(!r.passed());
    }
}
