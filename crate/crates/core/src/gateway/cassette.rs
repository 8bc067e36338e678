//! Append-only request-digest -> response store.
//!
//! File format: one record per line, `<digest hex>\t<base64 response>\n`,
//! sorted by digest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl FromStr for Digest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|e| e.to_string())?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| "digest must be 32 bytes".to_string())?;
        Ok(Digest(arr))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cassette {
    entries: BTreeMap<Digest, String>,
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, digest: &Digest) -> Option<&str> {
        self.entries.get(digest).map(String::as_str)
    }

    /// Inserts unless the digest is already present. Returns whether the
    /// entry was added.
    pub fn insert(&mut self, digest: Digest, response: impl Into<String>) -> bool {
        use std::collections::btree_map::Entry;
        match self.entries.entry(digest) {
            Entry::Vacant(v) => {
                v.insert(response.into());
                true
            }
            Entry::Occupied(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Digest, &str)> {
        self.entries.iter().map(|(d, r)| (d, r.as_str()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for (digest, response) in &self.entries {
            out.push_str(&digest.to_string());
            out.push('\t');
            out.push_str(&STANDARD.encode(response.as_bytes()));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GatewayError> {
        let corrupt = |offset: usize, reason: &str| GatewayError::CorruptCassette {
            offset,
            reason: reason.to_string(),
        };
        let mut entries = BTreeMap::new();
        let mut offset = 0;
        while offset < bytes.len() {
            let rest = &bytes[offset..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| corrupt(offset, "unterminated record"))?;
            let line = std::str::from_utf8(&rest[..end]).map_err(|_| corrupt(offset, "not UTF-8"))?;
            let (hex_part, b64) = line
                .split_once('\t')
                .ok_or_else(|| corrupt(offset, "missing tab separator"))?;
            let digest: Digest = hex_part.parse().map_err(|e: String| corrupt(offset, &e))?;
            let raw = STANDARD
                .decode(b64)
                .map_err(|_| corrupt(offset, "invalid base64"))?;
            let response = String::from_utf8(raw).map_err(|_| corrupt(offset, "response not UTF-8"))?;
            if entries.insert(digest, response).is_some() {
                return Err(corrupt(offset, "duplicate digest"));
            }
            offset += end + 1;
        }
        Ok(Self { entries })
    }

    pub fn persist(&self, path: &Path) -> Result<(), GatewayError> {
        let tmp = path.with_extension("cas.tmp");
        fs::write(&tmp, self.to_bytes()).map_err(|e| GatewayError::Io(e.to_string()))?;
        fs::rename(&tmp, path).map_err(|e| GatewayError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let bytes = fs::read(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
