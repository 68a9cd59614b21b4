//! Session bookkeeping, diff assignment and label persistence.
//!
//! All mutation goes through [`Study`]; the HTTP layer holds it behind one
//! mutex, so every assignment and every log append is atomic per request.
//! The log is append-only JSONL of [`AnnotationRecord`]s, and replaying it
//! rebuilds sessions, counts and metrics.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::LazyLock;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sentqual_core::eval::{read_annotation_log, study_report, AnnotationRecord, StudyReport, StudySample};
use sentqual_core::revision::sha1_hex;
use sentqual_core::{Category, EditDiff};

use crate::blind::BlindedDiff;

pub const PRACTICE_ID: &str = "practice";

static PRACTICE: LazyLock<EditDiff> =
    LazyLock::new(|| serde_json::from_str(include_str!("../data/practice.json")).expect("practice fixture parses"));

pub fn practice_diff() -> &'static EditDiff {
    &PRACTICE
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StudyError {
    #[error("annotator id must not be empty")]
    EmptyAnnotator,
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("{0}")]
    Invalid(String),
    #[error("diff {diff_id} was already labeled by {annotator_id}")]
    Duplicate { diff_id: String, annotator_id: String },
    #[error("diff {0} is not assigned to this session")]
    NotAssigned(String),
    #[error("label log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub annotator_id: String,
    pub practice_done: bool,
    pub submitted_count: usize,
    pub cap: usize,
    #[serde(with = "sentqual_core::revision::timestamp_format")]
    pub started_at: DateTime<Utc>,
    #[serde(skip)]
    last_seen: Option<DateTime<Utc>>,
    #[serde(skip)]
    in_flight: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Next {
    /// A diff to label; `practice` marks the warm-up item.
    Diff {
        diff: BlindedDiff,
        practice: bool,
        submitted_count: usize,
        cap: usize,
    },
    /// Every remaining diff is currently with another annotator.
    Wait,
    Done { submitted_count: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub diff_id: String,
    #[serde(default)]
    pub categories: BTreeSet<Category>,
    #[serde(default)]
    pub none_flag: bool,
    #[serde(default)]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub diff_id: String,
    pub practice: bool,
    pub submitted_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// For example "3 of 20 labeled".
    pub summary: String,
    #[serde(flatten)]
    pub report: StudyReport,
}

pub struct StudySettings {
    pub cap: usize,
    pub seed: u64,
    pub min_annotators: usize,
    pub idle_timeout: Duration,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            cap: 250,
            seed: 0,
            min_annotators: 3,
            idle_timeout: Duration::from_secs(2 * 60 * 60),
        }
    }
}

pub struct Study {
    sample: StudySample,
    index: HashMap<String, usize>,
    /// Seeded tie-break position per sample diff.
    rank: Vec<usize>,
    settings: StudySettings,
    annotators_of: Vec<HashSet<String>>,
    records: Vec<AnnotationRecord>,
    sessions: HashMap<String, Session>,
    session_of: HashMap<String, String>,
    /// Sample index -> session currently holding it.
    held_by: HashMap<usize, String>,
    log: Option<File>,
}

impl Study {
    pub fn new(sample: StudySample, settings: StudySettings) -> Study {
        let index = sample.diffs.iter().enumerate().map(|(i, e)| (e.diff_id.clone(), i)).collect();
        let mut order: Vec<usize> = (0..sample.diffs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(settings.seed));
        let mut rank = vec![0; order.len()];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        Study {
            annotators_of: vec![HashSet::new(); sample.diffs.len()],
            sample,
            index,
            rank,
            settings,
            records: Vec::new(),
            sessions: HashMap::new(),
            session_of: HashMap::new(),
            held_by: HashMap::new(),
            log: None,
        }
    }

    /// Replays an existing log at `path` (if any), then appends to it.
    pub fn with_log(mut self, path: &Path) -> Result<Study, StudyError> {
        if path.exists() {
            let file = File::open(path).map_err(|e| StudyError::Log(format!("{}: {e}", path.display())))?;
            let records = read_annotation_log(BufReader::new(file)).map_err(|e| StudyError::Log(e.to_string()))?;
            for r in records {
                self.apply(r);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| StudyError::Log(format!("{}: {e}", path.display())))?;
        self.log = Some(file);
        Ok(self)
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn sample(&self) -> &StudySample {
        &self.sample
    }

    fn session_id_for(&self, annotator_id: &str) -> String {
        let digest = sha1_hex(&format!("{}:{annotator_id}", self.settings.seed));
        format!("s{}", &digest[..16])
    }

    fn ensure_session(&mut self, annotator_id: &str, now: DateTime<Utc>) -> &mut Session {
        let id = match self.session_of.get(annotator_id) {
            Some(id) => id.clone(),
            None => {
                let id = self.session_id_for(annotator_id);
                self.session_of.insert(annotator_id.to_string(), id.clone());
                self.sessions.insert(
                    id.clone(),
                    Session {
                        session_id: id.clone(),
                        annotator_id: annotator_id.to_string(),
                        practice_done: false,
                        submitted_count: 0,
                        cap: self.settings.cap,
                        started_at: now,
                        last_seen: None,
                        in_flight: None,
                    },
                );
                id
            }
        };
        self.sessions.get_mut(&id).unwrap()
    }

    /// Folds one logged record into the state.
    fn apply(&mut self, record: AnnotationRecord) {
        let session = self.ensure_session(&record.annotator_id, record.submitted_at);
        if record.diff_id == PRACTICE_ID {
            session.practice_done = true;
        } else {
            session.submitted_count += 1;
            if let Some(&i) = self.index.get(&record.diff_id) {
                self.annotators_of[i].insert(record.annotator_id.clone());
            }
        }
        self.records.push(record);
    }

    /// Creates a session, or resumes the annotator's existing one.
    pub fn create_session(&mut self, annotator_id: &str, now: DateTime<Utc>) -> Result<Session, StudyError> {
        let annotator_id = annotator_id.trim();
        if annotator_id.is_empty() {
            return Err(StudyError::EmptyAnnotator);
        }
        let session = self.ensure_session(annotator_id, now);
        session.last_seen = Some(now);
        Ok(session.clone())
    }

    fn release_idle(&mut self, now: DateTime<Utc>) {
        let timeout = chrono::Duration::from_std(self.settings.idle_timeout).unwrap_or(chrono::Duration::MAX);
        for session in self.sessions.values_mut() {
            let idle = session.last_seen.is_some_and(|t| now - t > timeout);
            if idle {
                if let Some(diff_id) = session.in_flight.take() {
                    if let Some(i) = self.index.get(&diff_id) {
                        self.held_by.remove(i);
                    }
                }
            }
        }
    }

    fn serve(&self, session: &Session, diff_id: &str) -> Next {
        let (diff, practice) = if diff_id == PRACTICE_ID {
            (BlindedDiff::from_diff(PRACTICE_ID, practice_diff()), true)
        } else {
            let entry = &self.sample.diffs[self.index[diff_id]];
            (BlindedDiff::from_diff(&entry.diff_id, &entry.diff), false)
        };
        Next::Diff {
            diff,
            practice,
            submitted_count: session.submitted_count,
            cap: session.cap,
        }
    }

    /// Practice first, then the least-annotated diff this annotator has not
    /// seen. A diff is held by one session at a time until it is labeled or
    /// the session goes idle.
    pub fn next_diff(&mut self, session_id: &str, now: DateTime<Utc>) -> Result<Next, StudyError> {
        self.release_idle(now);
        let session = self
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        session.last_seen = Some(now);
        if let Some(held) = session.in_flight.clone() {
            let session = session.clone();
            return Ok(self.serve(&session, &held));
        }
        if !session.practice_done {
            session.in_flight = Some(PRACTICE_ID.to_string());
            let session = session.clone();
            return Ok(self.serve(&session, PRACTICE_ID));
        }
        if session.submitted_count >= session.cap {
            return Ok(Next::Done {
                submitted_count: session.submitted_count,
                cap: session.cap,
            });
        }
        let annotator = session.annotator_id.clone();
        let unseen: Vec<usize> = (0..self.sample.diffs.len())
            .filter(|&i| !self.annotators_of[i].contains(&annotator))
            .collect();
        let pick = unseen
            .iter()
            .copied()
            .filter(|i| !self.held_by.contains_key(i))
            .min_by_key(|&i| (self.annotators_of[i].len(), self.rank[i]));
        let Some(i) = pick else {
            let session = &self.sessions[session_id];
            return Ok(if unseen.is_empty() {
                Next::Done {
                    submitted_count: session.submitted_count,
                    cap: session.cap,
                }
            } else {
                Next::Wait
            });
        };
        self.held_by.insert(i, session_id.to_string());
        let diff_id = self.sample.diffs[i].diff_id.clone();
        let session = self.sessions.get_mut(session_id).unwrap();
        session.in_flight = Some(diff_id.clone());
        let session = session.clone();
        Ok(self.serve(&session, &diff_id))
    }

    pub fn submit(&mut self, session_id: &str, submission: Submission, now: DateTime<Utc>) -> Result<Ack, StudyError> {
        let session = self
            .sessions
            .get(session_id)
            .ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        let record = AnnotationRecord {
            diff_id: submission.diff_id.clone(),
            annotator_id: session.annotator_id.clone(),
            categories: submission.categories,
            none_flag: submission.none_flag,
            comment: submission.comment.filter(|c| !c.trim().is_empty()),
            submitted_at: now,
        };
        record.validate().map_err(|e| StudyError::Invalid(e.to_string()))?;
        let practice = record.diff_id == PRACTICE_ID;
        let already = if practice {
            session.practice_done
        } else {
            self.index
                .get(&record.diff_id)
                .is_some_and(|&i| self.annotators_of[i].contains(&record.annotator_id))
        };
        if already {
            return Err(StudyError::Duplicate {
                diff_id: record.diff_id,
                annotator_id: record.annotator_id,
            });
        }
        if session.in_flight.as_deref() != Some(record.diff_id.as_str()) {
            return Err(StudyError::NotAssigned(record.diff_id));
        }
        if let Some(log) = &mut self.log {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(log, "{line}")
                .and_then(|()| log.flush())
                .map_err(|e| StudyError::Log(e.to_string()))?;
        }
        if let Some(i) = self.index.get(&record.diff_id) {
            self.held_by.remove(i);
        }
        self.apply(record);
        let session = self.sessions.get_mut(session_id).unwrap();
        session.in_flight = None;
        session.last_seen = Some(now);
        Ok(Ack {
            diff_id: submission.diff_id,
            practice,
            submitted_count: session.submitted_count,
        })
    }

    pub fn metrics(&self) -> Metrics {
        let records: Vec<AnnotationRecord> = self.records.iter().filter(|r| r.diff_id != PRACTICE_ID).cloned().collect();
        let report = study_report(&records, &self.sample.pool_entries(), self.settings.min_annotators);
        Metrics {
            summary: format!("{} of {} labeled", report.coverage.labeled, report.coverage.sample_size),
            report,
        }
    }

    /// Distinct annotators per sample diff, in sample order.
    pub fn coverage(&self) -> Vec<usize> {
        self.annotators_of.iter().map(HashSet::len).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use sentqual_core::diff_revisions;
    use sentqual_core::eval::{SampleEntry, Stratum};

    pub(crate) fn sample(n: usize) -> StudySample {
        StudySample {
            seed: 1,
            diffs: (0..n)
                .map(|i| {
                    let mut diff = diff_revisions(&format!("Line {i} old."), &format!("Line {i} new."), "secret comment");
                    diff.old_rev_id = i as u64;
                    diff.new_rev_id = i as u64 + 1000;
                    SampleEntry {
                        diff_id: format!("d{i}"),
                        stratum: Stratum::Remainder,
                        labels: BTreeSet::new(),
                        diff,
                    }
                })
                .collect(),
        }
    }

    fn t(min: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2021, 6, 1, 9, 0, 0).unwrap() + chrono::Duration::minutes(min)
    }

    fn label(study: &mut Study, sid: &str, diff_id: &str, now: DateTime<Utc>) -> Result<Ack, StudyError> {
        study.submit(
            sid,
            Submission {
                diff_id: diff_id.into(),
                categories: BTreeSet::from([Category::Citation]),
                none_flag: false,
                comment: None,
            },
            now,
        )
    }

    fn served_id(next: &Next) -> String {
        match next {
            Next::Diff { diff, .. } => diff.diff_id.clone(),
            other => panic!("expected a diff, got {other:?}"),
        }
    }

    #[test]
    fn practice_comes_first_and_is_not_counted() {
        let mut s = Study::new(sample(3), StudySettings::default());
        let session = s.create_session("ann", t(0)).unwrap();
        let first = s.next_diff(&session.session_id, t(0)).unwrap();
        assert!(matches!(first, Next::Diff { practice: true, .. }));
        assert_eq!(served_id(&first), PRACTICE_ID);
        let ack = label(&mut s, &session.session_id, PRACTICE_ID, t(1)).unwrap();
        assert_eq!((ack.practice, ack.submitted_count), (true, 0));
        assert!(matches!(s.next_diff(&session.session_id, t(1)).unwrap(), Next::Diff { practice: false, .. }));
        assert_eq!(s.metrics().report.coverage.annotations, 0);
    }

    #[test]
    fn resume_and_reload_return_same_diff() {
        let mut s = Study::new(sample(3), StudySettings::default());
        let a = s.create_session("ann", t(0)).unwrap();
        assert_eq!(s.create_session("ann", t(1)).unwrap().session_id, a.session_id);
        assert_eq!(s.create_session("", t(1)), Err(StudyError::EmptyAnnotator));
        let p1 = s.next_diff(&a.session_id, t(1)).unwrap();
        assert_eq!(p1, s.next_diff(&a.session_id, t(2)).unwrap());
    }

    #[test]
    fn least_annotated_first() {
        let mut s = Study::new(sample(2), StudySettings::default());
        let mut sessions = Vec::new();
        for name in ["a", "b", "c"] {
            let sid = s.create_session(name, t(0)).unwrap().session_id;
            s.next_diff(&sid, t(0)).unwrap();
            label(&mut s, &sid, PRACTICE_ID, t(0)).unwrap();
            sessions.push(sid);
        }
        // a labels X; b then gets the other diff Y (0 annotations) before X
        let x = served_id(&s.next_diff(&sessions[0], t(1)).unwrap());
        label(&mut s, &sessions[0], &x, t(1)).unwrap();
        let y = served_id(&s.next_diff(&sessions[1], t(2)).unwrap());
        assert_ne!(x, y);
        label(&mut s, &sessions[1], &y, t(2)).unwrap();
        // a has seen X, so it gets Y; c sees both with one annotation each
        assert_eq!(served_id(&s.next_diff(&sessions[0], t(3)).unwrap()), y);
        let for_c = served_id(&s.next_diff(&sessions[2], t(3)).unwrap());
        assert_eq!(for_c, x);
    }

    #[test]
    fn validation_and_conflicts() {
        let mut s = Study::new(sample(2), StudySettings::default());
        let sid = s.create_session("ann", t(0)).unwrap().session_id;
        s.next_diff(&sid, t(0)).unwrap();
        label(&mut s, &sid, PRACTICE_ID, t(0)).unwrap();
        let d = served_id(&s.next_diff(&sid, t(0)).unwrap());
        let empty = Submission {
            diff_id: d.clone(),
            categories: BTreeSet::new(),
            none_flag: false,
            comment: None,
        };
        assert!(matches!(s.submit(&sid, empty.clone(), t(1)), Err(StudyError::Invalid(_))));
        let both = Submission {
            categories: BTreeSet::from([Category::Clarification]),
            none_flag: true,
            ..empty.clone()
        };
        assert!(matches!(s.submit(&sid, both, t(1)), Err(StudyError::Invalid(_))));
        let other = if d == "d0" { "d1" } else { "d0" };
        assert!(matches!(label(&mut s, &sid, other, t(1)), Err(StudyError::NotAssigned(_))));
        label(&mut s, &sid, &d, t(1)).unwrap();
        assert!(matches!(label(&mut s, &sid, &d, t(2)), Err(StudyError::Duplicate { .. })));
        assert!(matches!(s.next_diff("nope", t(2)), Err(StudyError::UnknownSession(_))));
    }

    #[test]
    fn cap_and_exhaustion() {
        let settings = StudySettings {
            cap: 2,
            ..StudySettings::default()
        };
        let mut s = Study::new(sample(5), settings);
        let sid = s.create_session("ann", t(0)).unwrap().session_id;
        s.next_diff(&sid, t(0)).unwrap();
        label(&mut s, &sid, PRACTICE_ID, t(0)).unwrap();
        for k in 0..2 {
            let d = served_id(&s.next_diff(&sid, t(k)).unwrap());
            label(&mut s, &sid, &d, t(k)).unwrap();
        }
        assert_eq!(s.next_diff(&sid, t(5)).unwrap(), Next::Done { submitted_count: 2, cap: 2 });

        let mut small = Study::new(sample(1), StudySettings::default());
        let sid = small.create_session("ann", t(0)).unwrap().session_id;
        small.next_diff(&sid, t(0)).unwrap();
        label(&mut small, &sid, PRACTICE_ID, t(0)).unwrap();
        let d = served_id(&small.next_diff(&sid, t(0)).unwrap());
        label(&mut small, &sid, &d, t(0)).unwrap();
        assert!(matches!(small.next_diff(&sid, t(1)).unwrap(), Next::Done { .. }));
    }

    #[test]
    fn held_diffs_wait_then_release_on_idle() {
        let mut s = Study::new(sample(1), StudySettings::default());
        let a = s.create_session("a", t(0)).unwrap().session_id;
        let b = s.create_session("b", t(0)).unwrap().session_id;
        for sid in [&a, &b] {
            s.next_diff(sid, t(0)).unwrap();
            label(&mut s, sid, PRACTICE_ID, t(0)).unwrap();
        }
        let d = served_id(&s.next_diff(&a, t(1)).unwrap());
        assert_eq!(s.next_diff(&b, t(2)).unwrap(), Next::Wait);
        // a goes quiet for more than two hours
        assert_eq!(served_id(&s.next_diff(&b, t(200)).unwrap()), d);
        assert!(matches!(label(&mut s, &a, &d, t(201)), Err(StudyError::NotAssigned(_))));
    }

    #[test]
    fn replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("labels.jsonl");
        let mut s = Study::new(sample(4), StudySettings::default()).with_log(&log).unwrap();
        let sid = s.create_session("ann", t(0)).unwrap().session_id;
        s.next_diff(&sid, t(0)).unwrap();
        label(&mut s, &sid, PRACTICE_ID, t(0)).unwrap();
        let d = served_id(&s.next_diff(&sid, t(1)).unwrap());
        label(&mut s, &sid, &d, t(1)).unwrap();
        let before = s.metrics();
        drop(s);

        let mut again = Study::new(sample(4), StudySettings::default()).with_log(&log).unwrap();
        assert_eq!(again.metrics(), before);
        let resumed = again.create_session("ann", t(2)).unwrap();
        assert_eq!((resumed.session_id, resumed.submitted_count, resumed.practice_done), (sid.clone(), 1, true));
        assert_ne!(served_id(&again.next_diff(&sid, t(2)).unwrap()), d);
    }
}
