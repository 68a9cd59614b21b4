//! Identity-revert detection over one page's history.
//!
//! Revision `r` reverts to `q` when `q` is the most recent earlier revision
//! with the same sha1, at least one and at most `window` revisions lie
//! between them, and `r` was saved within `horizon` of `q`. Reverts are
//! resolved in ascending order of `r`; a revision already claimed keeps its
//! first status.

use chrono::Duration;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::RevertError;
use crate::revision::Revision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevertStatus {
    Clean,
    Reverted,
    Reverting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RevertConfig {
    pub window: usize,
    pub horizon: Duration,
    /// Whether reverting revisions are dropped from labeling along with reverted ones.
    pub exclude_reverting: bool,
}

impl Default for RevertConfig {
    fn default() -> Self {
        RevertConfig {
            window: 15,
            horizon: Duration::days(2),
            exclude_reverting: true,
        }
    }
}

impl RevertConfig {
    pub fn excludes(&self, status: RevertStatus) -> bool {
        match status {
            RevertStatus::Clean => false,
            RevertStatus::Reverted => true,
            RevertStatus::Reverting => self.exclude_reverting,
        }
    }
}

/// Statuses aligned with `revs`, which must be in `(timestamp, rev_id)` order.
pub fn detect_reverts(revs: &[Revision], config: &RevertConfig) -> Result<Vec<RevertStatus>, RevertError> {
    if let Some(position) = revs.windows(2).position(|w| w[0].order_key() > w[1].order_key()) {
        return Err(RevertError::Unsorted { position: position + 1 });
    }
    let mut status = vec![RevertStatus::Clean; revs.len()];
    let mut last_seen: HashMap<&str, usize> = HashMap::new();
    for (r, rev) in revs.iter().enumerate() {
        if let Some(&q) = last_seen.get(rev.sha1.as_str()) {
            let interior = r - q - 1;
            if interior >= 1 && interior <= config.window && rev.timestamp - revs[q].timestamp <= config.horizon {
                for s in &mut status[q + 1..r] {
                    if *s == RevertStatus::Clean {
                        *s = RevertStatus::Reverted;
                    }
                }
                if status[r] == RevertStatus::Clean {
                    status[r] = RevertStatus::Reverting;
                }
            }
        }
        last_seen.insert(rev.sha1.as_str(), r);
    }
    Ok(status)
}

/// Map form keyed by revision id.
pub fn revert_map(revs: &[Revision], config: &RevertConfig) -> Result<HashMap<u64, RevertStatus>, RevertError> {
    let statuses = detect_reverts(revs, config)?;
    Ok(revs.iter().map(|r| r.rev_id).zip(statuses).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use RevertStatus::*;

    fn history(texts: &[&str], minutes_apart: i64) -> Vec<Revision> {
        let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Revision::new(i as u64 + 1, 1, None, t0 + Duration::minutes(minutes_apart * i as i64), "", *t, "P")
            })
            .collect()
    }

    /// Quadratic reference: for each r, scan every earlier q and keep the
    /// latest one with an equal digest; then apply the window and horizon.
    fn oracle(revs: &[Revision], config: &RevertConfig) -> Vec<RevertStatus> {
        let n = revs.len();
        let mut reverting_pairs = Vec::new();
        for r in 0..n {
            let mut best = None;
            for q in 0..r {
                if revs[q].sha1 == revs[r].sha1 {
                    best = Some(q);
                }
            }
            if let Some(q) = best {
                if r - q > 1 && r - q - 1 <= config.window && revs[r].timestamp - revs[q].timestamp <= config.horizon {
                    reverting_pairs.push((q, r));
                }
            }
        }
        let mut out = vec![Clean; n];
        for (q, r) in reverting_pairs {
            for s in &mut out[q + 1..r] {
                if *s == Clean {
                    *s = Reverted;
                }
            }
            if out[r] == Clean {
                out[r] = Reverting;
            }
        }
        out
    }

    #[test]
    fn simple_revert() {
        let revs = history(&["A", "B", "A"], 20);
        assert_eq!(detect_reverts(&revs, &RevertConfig::default()).unwrap(), vec![Clean, Reverted, Reverting]);
    }

    #[test]
    fn too_late() {
        let revs = history(&["A", "B", "A"], 60 * 36);
        assert_eq!(detect_reverts(&revs, &RevertConfig::default()).unwrap(), vec![Clean; 3]);
    }

    #[test]
    fn window_exceeded() {
        let mut texts = vec!["A".to_string()];
        texts.extend((0..16).map(|i| format!("h{i}")));
        texts.push("A".to_string());
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let revs = history(&refs, 1);
        assert!(detect_reverts(&revs, &RevertConfig::default()).unwrap().iter().all(|s| *s == Clean));

        // 15 intervening revisions is still inside the window
        let mut inside = refs[..16].to_vec();
        inside.push("A");
        let statuses = detect_reverts(&history(&inside, 1), &RevertConfig::default()).unwrap();
        assert_eq!(statuses[16], Reverting);
    }

    #[test]
    fn null_edit_is_not_a_revert() {
        let revs = history(&["A", "A"], 1);
        assert_eq!(detect_reverts(&revs, &RevertConfig::default()).unwrap(), vec![Clean, Clean]);
    }

    #[test]
    fn unsorted_rejected() {
        let mut revs = history(&["A", "B"], 5);
        revs.swap(0, 1);
        assert!(matches!(
            detect_reverts(&revs, &RevertConfig::default()),
            Err(RevertError::Unsorted { position: 1 })
        ));
    }

    #[test]
    fn excludes_flag() {
        let c = RevertConfig::default();
        assert!(c.excludes(Reverted) && c.excludes(Reverting) && !c.excludes(Clean));
        let lenient = RevertConfig { exclude_reverting: false, ..c };
        assert!(!lenient.excludes(Reverting));
    }

    proptest! {
        #[test]
        fn agrees_with_oracle(
            digests in proptest::collection::vec(0u8..5, 0..200),
            gaps in proptest::collection::vec(0i64..400, 200),
        ) {
            let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
            let mut t = t0;
            let revs: Vec<Revision> = digests
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    t += Duration::minutes(gaps[i] * 30);
                    Revision::new(i as u64 + 1, 1, None, t, "", format!("v{d}"), "P")
                })
                .collect();
            let config = RevertConfig::default();
            prop_assert_eq!(detect_reverts(&revs, &config).unwrap(), oracle(&revs, &config));
        }
    }
}
