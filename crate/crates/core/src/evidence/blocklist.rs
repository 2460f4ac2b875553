use std::collections::BTreeSet;
use std::path::Path;

use url::Url;

const DEFAULT_LIST: &str = include_str!("../../blocklists/fact_checkers.txt");

/// Domains whose pages must never be used as evidence. A URL is blocked when
/// its host equals an entry or is a subdomain of one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blocklist {
    domains: BTreeSet<String>,
}

impl Blocklist {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled list of fact-checking sites.
    pub fn fact_checkers() -> Self {
        Self::parse(DEFAULT_LIST).expect("bundled blocklist is valid")
    }

    /// Parses one domain per line; `#` starts a comment. Entries are
    /// lowercased; schemes, paths and ports are rejected.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut list = Self::default();
        for (idx, line) in text.lines().enumerate() {
            let entry = line.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            list.insert(entry).map_err(|e| format!("line {}: {e}", idx + 1))?;
        }
        Ok(list)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn insert(&mut self, domain: &str) -> Result<(), String> {
        let d = domain.trim().trim_start_matches("*.").trim_start_matches('.').to_ascii_lowercase();
        if d.is_empty() || d.contains("://") || d.contains(['/', ':', ' ', '?', '#']) || !d.contains('.') {
            return Err(format!("{domain:?} is not a bare domain"));
        }
        self.domains.insert(d);
        Ok(())
    }

    pub fn extend(&mut self, other: &Blocklist) {
        self.domains.extend(other.domains.iter().cloned());
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.domains.iter().map(String::as_str)
    }

    pub fn is_blocked_host(&self, host: &str) -> bool {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        let mut candidate = host.as_str();
        loop {
            if self.domains.contains(candidate) {
                return true;
            }
            match candidate.split_once('.') {
                Some((_, rest)) => candidate = rest,
                None => return false,
            }
        }
    }

    /// Unparseable URLs are not considered blocked; callers validate URLs
    /// separately.
    pub fn is_blocked(&self, url: &str) -> bool {
        Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(|h| self.is_blocked_host(h)))
            .unwrap_or(false)
    }
}
