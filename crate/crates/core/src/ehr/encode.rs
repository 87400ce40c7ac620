use serde::{Deserialize, Serialize};

use crate::ehr::multihot::MultiHotVector;
use crate::ehr::patient::Visit;
use crate::ehr::vocab::Vocabulary;
use crate::error::{Error, Result};

/// What to do with a code that is absent from the vocabulary. Dropping
/// with a count is the default: evaluation vocabularies must equal the
/// training vocabularies to keep tensor shapes fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownCodePolicy {
    #[default]
    DropWithCount,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounter {
    pub diag_dropped: u64,
    pub lab_dropped: u64,
}

fn encode_codes<'a>(
    codes: impl Iterator<Item = &'a String>,
    vocab: &Vocabulary,
    policy: UnknownCodePolicy,
    dropped: &mut u64,
) -> Result<MultiHotVector> {
    let mut v = MultiHotVector::new(vocab.size());
    for code in codes {
        match vocab.index_of(code) {
            Some(i) => v.set(i, true),
            None => match policy {
                UnknownCodePolicy::DropWithCount => *dropped += 1,
                UnknownCodePolicy::Error => {
                    return Err(Error::Invalid(format!(
                        "code `{code}` not in {} vocabulary",
                        vocab.kind().name()
                    )));
                }
            },
        }
    }
    Ok(v)
}

/// Encode one visit as (x_diag, x_lab) multi-hot pairs over the two
/// vocabularies.
pub fn encode_visit(
    visit: &Visit,
    diag_vocab: &Vocabulary,
    lab_vocab: &Vocabulary,
    policy: UnknownCodePolicy,
    counter: &mut DropCounter,
) -> Result<(MultiHotVector, MultiHotVector)> {
    let x_diag = encode_codes(
        visit.diag_codes.iter(),
        diag_vocab,
        policy,
        &mut counter.diag_dropped,
    )?;
    let x_lab = encode_codes(
        visit.lab_abnormal.iter(),
        lab_vocab,
        policy,
        &mut counter.lab_dropped,
    )?;
    Ok((x_diag, x_lab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::vocab::VocabKind;
    use std::collections::BTreeSet;

    fn visit(diags: &[&str], labs: &[&str]) -> Visit {
        Visit {
            visit_id: "v1".into(),
            admit_time: 0,
            diag_codes: diags.iter().map(|s| s.to_string()).collect(),
            lab_abnormal: labs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn bits_set_for_present_codes() {
        let diag = Vocabulary::build(VocabKind::Diagnosis, ["c0", "c1", "c2", "c3"]);
        let lab = Vocabulary::build(VocabKind::Lab, ["l0", "l1", "l2"]);
        let v = visit(&["c0", "c2"], &[]);
        let mut counter = DropCounter::default();
        let (xd, xl) = encode_visit(
            &v,
            &diag,
            &lab,
            UnknownCodePolicy::DropWithCount,
            &mut counter,
        )
        .unwrap();
        assert_eq!(xd.bits(), &[true, false, true, false]);
        assert_eq!(xl.bits(), &[false, false, false]);
        assert_eq!(counter, DropCounter::default());
    }

    #[test]
    fn unknown_code_dropped_and_counted() {
        let diag = Vocabulary::build(VocabKind::Diagnosis, ["c0"]);
        let lab = Vocabulary::build(VocabKind::Lab, ["l0"]);
        let v = visit(&["c0", "mystery"], &["l0", "weird"]);
        let mut counter = DropCounter::default();
        let (xd, xl) = encode_visit(
            &v,
            &diag,
            &lab,
            UnknownCodePolicy::DropWithCount,
            &mut counter,
        )
        .unwrap();
        assert_eq!(xd.count_ones(), 1);
        assert_eq!(xl.count_ones(), 1);
        assert_eq!(counter.diag_dropped, 1);
        assert_eq!(counter.lab_dropped, 1);
    }

    #[test]
    fn unknown_code_errors_under_strict_policy() {
        let diag = Vocabulary::build(VocabKind::Diagnosis, ["c0"]);
        let lab = Vocabulary::build(VocabKind::Lab, ["l0"]);
        let v = visit(&["nope"], &[]);
        let mut counter = DropCounter::default();
        assert!(encode_visit(&v, &diag, &lab, UnknownCodePolicy::Error, &mut counter).is_err());
    }

    #[test]
    fn decoding_set_bits_reproduces_known_codes() {
        let diag = Vocabulary::build(VocabKind::Diagnosis, ["a", "b", "c"]);
        let lab = Vocabulary::build(VocabKind::Lab, Vec::<String>::new());
        let v = visit(&["a", "c", "unknown"], &[]);
        let mut counter = DropCounter::default();
        let (xd, _) = encode_visit(
            &v,
            &diag,
            &lab,
            UnknownCodePolicy::DropWithCount,
            &mut counter,
        )
        .unwrap();
        let decoded: BTreeSet<String> = xd
            .iter_ones()
            .map(|i| diag.code_at(i).unwrap().to_string())
            .collect();
        let expected: BTreeSet<String> = ["a", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(decoded, expected);
    }
}
