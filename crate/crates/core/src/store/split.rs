use serde::{Deserialize, Serialize};

use super::{ActivationDataset, Split};
use crate::error::{Error, Result};

/// Train/val/test fractions; must be positive and sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::invalid(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn assign(&self, unit: f64) -> Split {
        if unit < self.train {
            Split::Train
        } else if unit < self.train + self.val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Maps `(question_id, seed)` to a point in `[0, 1)`.
///
/// FNV-1a over the little-endian seed followed by the UTF-8 id, finished with
/// the SplitMix64 mixer; stable across platforms and releases.
pub fn split_unit(question_id: &str, seed: u64) -> f64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(question_id.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Assigns every row a split; all rows of one question land together.
pub fn split_by_question(ds: &ActivationDataset, fractions: SplitFractions, seed: u64) -> Result<ActivationDataset> {
    fractions.validate()?;
    if ds.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let mut out = ds.clone();
    for m in &mut out.meta {
        m.split = Some(fractions.assign(split_unit(&m.question_id, seed)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{Condition, Position, RowMeta};
    use std::collections::HashMap;

    fn dataset(ids: &[String]) -> ActivationDataset {
        let meta = ids.iter().map(|q| RowMeta::new(q.clone(), "d")).collect::<Vec<_>>();
        ActivationDataset::new(
            1,
            0,
            "m",
            Condition::PureCorrectness,
            Position::PromptFinal,
            vec![0.0; ids.len()],
            meta,
        )
        .unwrap()
    }

    #[test]
    fn single_question_stays_together() {
        let ids = vec!["only".to_string(); 25];
        let out = split_by_question(&dataset(&ids), SplitFractions::default(), 3).unwrap();
        let first = out.meta[0].split;
        assert!(out.meta.iter().all(|m| m.split == first));
    }

    #[test]
    fn thousand_questions_near_target_and_deterministic() {
        let ids: Vec<String> = (0..1000).map(|i| format!("q{i}")).collect();
        let ds = dataset(&ids);
        let f = SplitFractions::new(0.6, 0.2, 0.2).unwrap();
        let a = split_by_question(&ds, f, 42).unwrap();
        let b = split_by_question(&ds, f, 42).unwrap();
        assert_eq!(a, b);
        let mut counts: HashMap<Split, usize> = HashMap::new();
        for m in &a.meta {
            *counts.entry(m.split.unwrap()).or_default() += 1;
        }
        for (split, target) in [(Split::Train, 600.0), (Split::Val, 200.0), (Split::Test, 200.0)] {
            let got = counts[&split] as f64;
            assert!((got - target).abs() <= 50.0, "{split:?}: {got}");
        }
    }

    #[test]
    fn seed_changes_assignment() {
        let ids: Vec<String> = (0..200).map(|i| format!("q{i}")).collect();
        let ds = dataset(&ids);
        let a = split_by_question(&ds, SplitFractions::default(), 1).unwrap();
        let b = split_by_question(&ds, SplitFractions::default(), 2).unwrap();
        assert!(a.meta.iter().zip(&b.meta).any(|(x, y)| x.split != y.split));
    }

    #[test]
    fn rejects_bad_fractions_and_empty() {
        assert!(SplitFractions::new(0.5, 0.5, 0.0).is_err());
        assert!(SplitFractions::new(0.5, 0.3, 0.3).is_err());
        assert!(split_by_question(&dataset(&[]), SplitFractions::default(), 0).is_err());
    }
}
