use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Vocabulary sizes reported for the full MIMIC-III tables, used as
/// validation-hook defaults when ingesting that dataset.
pub const MIMIC3_DIAGNOSIS_CODES: usize = 4880;
pub const MIMIC3_LAB_ITEMS: usize = 697;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabKind {
    Diagnosis,
    Lab,
}

impl VocabKind {
    pub fn name(self) -> &'static str {
        match self {
            VocabKind::Diagnosis => "diagnosis",
            VocabKind::Lab => "lab",
        }
    }
}

/// Bidirectional code <-> index map. Indices are assigned in lexicographic
/// code order, so a vocabulary is fully determined by its code set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    kind: VocabKind,
    codes: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn build<I, S>(kind: VocabKind, codes: I) -> Vocabulary
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut unique: Vec<String> = codes.into_iter().map(|c| c.as_ref().to_string()).collect();
        unique.sort_unstable();
        unique.dedup();
        let index = unique
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Vocabulary {
            kind,
            codes: unique,
            index,
        }
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.codes.len()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn code_at(&self, index: usize) -> Option<&str> {
        self.codes.get(index).map(|s| s.as_str())
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    /// Order-sensitive content hash binding models to the exact vocabulary
    /// they were trained against. Codes are length-prefixed so distinct
    /// code lists can never collide by concatenation.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.codes.len() as u64).to_le_bytes());
        for code in &self.codes {
            hasher.update((code.len() as u64).to_le_bytes());
            hasher.update(code.as_bytes());
        }
        hex_string(&hasher.finalize())
    }

    /// Validation hook: error when the built size differs from an expected
    /// count (e.g. the published MIMIC-III table sizes).
    pub fn expect_size(&self, expected: usize) -> Result<()> {
        if self.size() != expected {
            return Err(Error::Invalid(format!(
                "{} vocabulary has {} codes, expected {expected}",
                self.kind.name(),
                self.size()
            )));
        }
        Ok(())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
