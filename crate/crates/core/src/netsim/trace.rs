use std::fmt;
use std::io;

use crate::primitives::{keccak256, ChainId, Hash32, RequestId};

/// One executed event: `tick,kind,chain,request_id,payload_digest`.
/// Events not tied to a request carry `-` in the request column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub tick: u64,
    pub kind: &'static str,
    pub chain: ChainId,
    pub request_id: Option<RequestId>,
    pub digest: Hash32,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},", self.tick, self.kind, self.chain)?;
        match &self.request_id {
            Some(r) => write!(f, "{r}")?,
            None => f.write_str("-")?,
        }
        write!(f, ",{}", self.digest)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    lines: Vec<TraceLine>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, line: TraceLine) {
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[TraceLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.lines.iter().filter(|l| l.kind == kind).count()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    pub fn write_to<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.render().as_bytes())
    }

    /// Digest of the rendered file.
    pub fn digest(&self) -> Hash32 {
        keccak256(self.render().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let l = TraceLine {
            tick: 7,
            kind: "deliver",
            chain: ChainId::from_label("B").unwrap(),
            request_id: None,
            digest: Hash32::ZERO,
        };
        assert_eq!(
            l.to_string(),
            format!("7,deliver,B,-,0x{}", "00".repeat(32))
        );
        let mut t = Trace::new();
        t.push(l);
        assert_eq!(t.render().lines().count(), 1);
        assert_eq!(t.digest(), keccak256(t.render().as_bytes()));
    }
}
