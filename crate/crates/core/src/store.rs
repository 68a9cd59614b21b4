//! Page-indexed on-disk revision store.
//!
//! Layout under the store root:
//!
//! ```text
//! INDEX                 "SENTQUAL-STORE 1\n" then one "<rev_id>\t<page_id>\n" per record
//! pages/<page_id>.revs  "SENTQUAL-PAGE 1\n" then records:
//!                       "REV <rev_id> <len>\n" <len bytes of Revision JSON> "\n"
//! ```
//!
//! Records are append-only. `put` ignores revision ids already present, so
//! re-ingesting is idempotent. One writer and any number of readers may share
//! a `Store` across threads.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::error::StoreError;
use crate::revision::{sort_revisions, Revision};

const INDEX_MAGIC: &str = "SENTQUAL-STORE 1";
const PAGE_MAGIC: &str = "SENTQUAL-PAGE 1";

#[derive(Default)]
struct Index {
    revs: HashMap<u64, u64>,
}

pub struct Store {
    root: PathBuf,
    index: RwLock<Index>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl Store {
    /// Opens the store at `root`, creating it if needed.
    pub fn open(root: impl AsRef<Path>) -> Result<Store, StoreError> {
        let root = root.as_ref().to_path_buf();
        let pages = root.join("pages");
        fs::create_dir_all(&pages).map_err(io_err(&pages))?;
        let index_path = root.join("INDEX");
        let mut index = Index::default();
        if index_path.exists() {
            let file = File::open(&index_path).map_err(io_err(&index_path))?;
            let mut lines = BufReader::new(file).lines();
            match lines.next() {
                Some(Ok(first)) if first == INDEX_MAGIC => {}
                Some(Err(e)) => return Err(io_err(&index_path)(e)),
                _ => {
                    return Err(StoreError::BadMagic {
                        path: index_path.display().to_string(),
                    })
                }
            }
            for (i, line) in lines.enumerate() {
                let line = line.map_err(io_err(&index_path))?;
                if line.is_empty() {
                    continue;
                }
                let parsed = line
                    .split_once('\t')
                    .and_then(|(r, p)| Some((r.parse::<u64>().ok()?, p.parse::<u64>().ok()?)));
                let Some((rev_id, page_id)) = parsed else {
                    return Err(StoreError::CorruptIndex {
                        line: i + 2,
                        message: format!("unparsable entry {line:?}"),
                    });
                };
                index.revs.insert(rev_id, page_id);
            }
        } else {
            fs::write(&index_path, format!("{INDEX_MAGIC}\n")).map_err(io_err(&index_path))?;
        }
        Ok(Store {
            root,
            index: RwLock::new(index),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn page_path(&self, page_id: u64) -> PathBuf {
        self.root.join("pages").join(format!("{page_id}.revs"))
    }

    /// Number of stored revisions.
    pub fn len(&self) -> usize {
        self.index.read().unwrap().revs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, rev_id: u64) -> bool {
        self.index.read().unwrap().revs.contains_key(&rev_id)
    }

    /// Page ids with at least one stored revision, ascending.
    pub fn page_ids(&self) -> Vec<u64> {
        let index = self.index.read().unwrap();
        let set: BTreeSet<u64> = index.revs.values().copied().collect();
        set.into_iter().collect()
    }

    /// Appends a revision. Returns `false` when `rev_id` was already stored.
    pub fn put(&self, rev: &Revision) -> Result<bool, StoreError> {
        if !rev.digest_matches() {
            return Err(StoreError::Corrupt {
                rev_id: rev.rev_id,
                message: "sha1 does not match text".into(),
            });
        }
        let mut index = self.index.write().unwrap();
        if index.revs.contains_key(&rev.rev_id) {
            return Ok(false);
        }
        let path = self.page_path(rev.page_id);
        let fresh = !path.exists();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let payload = serde_json::to_vec(rev).expect("revision serializes");
        let mut record = Vec::with_capacity(payload.len() + 48);
        if fresh {
            record.extend_from_slice(PAGE_MAGIC.as_bytes());
            record.push(b'\n');
        }
        record.extend_from_slice(format!("REV {} {}\n", rev.rev_id, payload.len()).as_bytes());
        record.extend_from_slice(&payload);
        record.push(b'\n');
        file.write_all(&record).map_err(io_err(&path))?;
        file.flush().map_err(io_err(&path))?;

        let index_path = self.root.join("INDEX");
        let mut index_file = OpenOptions::new()
            .append(true)
            .open(&index_path)
            .map_err(io_err(&index_path))?;
        writeln!(index_file, "{}\t{}", rev.rev_id, rev.page_id).map_err(io_err(&index_path))?;
        index.revs.insert(rev.rev_id, rev.page_id);
        Ok(true)
    }

    /// Puts every revision, returning how many were new.
    pub fn put_all<'a>(&self, revs: impl IntoIterator<Item = &'a Revision>) -> Result<usize, StoreError> {
        let mut added = 0;
        for rev in revs {
            if self.put(rev)? {
                added += 1;
            }
        }
        Ok(added)
    }

    /// All revisions of a page in `(timestamp, rev_id)` order; unknown pages are empty.
    pub fn scan(&self, page_id: u64) -> Result<Vec<Revision>, StoreError> {
        let _guard = self.index.read().unwrap();
        let path = self.page_path(page_id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut data = Vec::new();
        File::open(&path)
            .and_then(|mut f| f.read_to_end(&mut data))
            .map_err(io_err(&path))?;
        let mut revs = decode_page(&data, &path)?;
        sort_revisions(&mut revs);
        revs.dedup_by_key(|r| r.rev_id);
        Ok(revs)
    }
}

fn decode_page(data: &[u8], path: &Path) -> Result<Vec<Revision>, StoreError> {
    let header_end = data.iter().position(|&b| b == b'\n').unwrap_or(data.len());
    if &data[..header_end] != PAGE_MAGIC.as_bytes() {
        return Err(StoreError::BadMagic {
            path: path.display().to_string(),
        });
    }
    let mut pos = header_end + 1;
    let mut out = Vec::new();
    let mut last_rev = 0u64;
    while pos < data.len() {
        let line_end = data[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p)
            .ok_or_else(|| StoreError::Corrupt {
                rev_id: last_rev,
                message: "truncated record header after this revision".into(),
            })?;
        let header = std::str::from_utf8(&data[pos..line_end]).unwrap_or("");
        let mut parts = header.split(' ');
        let (Some("REV"), Some(rev), Some(len), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(StoreError::Corrupt {
                rev_id: last_rev,
                message: format!("bad record header {header:?} after this revision"),
            });
        };
        let rev_id: u64 = rev.parse().map_err(|_| StoreError::Corrupt {
            rev_id: last_rev,
            message: format!("bad revision id {rev:?} after this revision"),
        })?;
        let corrupt = |message: &str| StoreError::Corrupt {
            rev_id,
            message: message.to_string(),
        };
        let len: usize = len.parse().map_err(|_| corrupt("bad record length"))?;
        let body_start = line_end + 1;
        let body_end = body_start + len;
        if data.get(body_end) != Some(&b'\n') {
            return Err(corrupt("truncated record"));
        }
        let rev: Revision =
            serde_json::from_slice(&data[body_start..body_end]).map_err(|e| corrupt(&e.to_string()))?;
        if rev.rev_id != rev_id {
            return Err(corrupt("header id disagrees with payload"));
        }
        if !rev.digest_matches() {
            return Err(corrupt("sha1 does not match text"));
        }
        out.push(rev);
        last_rev = rev_id;
        pos = body_end + 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn rev(rev_id: u64, page_id: u64, hour: u32) -> Revision {
        let ts = Utc.with_ymd_and_hms(2021, 5, 1, hour, 0, 0).unwrap();
        Revision::new(rev_id, page_id, None, ts, "", format!("body {rev_id}"), "T")
    }

    #[test]
    fn put_five_scan_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        for (id, hour) in [(5, 4), (1, 0), (3, 2), (2, 1), (4, 3)] {
            assert!(store.put(&rev(id, 10, hour)).unwrap());
        }
        let ids: Vec<_> = store.scan(10).unwrap().iter().map(|r| r.rev_id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5]);
        assert!(store.scan(11).unwrap().is_empty());
    }

    #[test]
    fn duplicate_put_is_ignored_and_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            assert!(store.put(&rev(1, 1, 0)).unwrap());
            assert!(!store.put(&rev(1, 1, 0)).unwrap());
        }
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.len(), 1);
        assert!(!store.put(&rev(1, 1, 0)).unwrap());
        assert_eq!(store.scan(1).unwrap().len(), 1);
    }

    #[test]
    fn interleaved_pages_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        for i in 0..6u64 {
            store.put(&rev(100 + i, if i % 2 == 0 { 7 } else { 8 }, i as u32)).unwrap();
        }
        let seven: Vec<_> = store.scan(7).unwrap().iter().map(|r| r.rev_id).collect();
        let eight: Vec<_> = store.scan(8).unwrap().iter().map(|r| r.rev_id).collect();
        assert_eq!(seven, vec![100, 102, 104]);
        assert_eq!(eight, vec![101, 103, 105]);
        assert_eq!(store.page_ids(), vec![7, 8]);
    }

    #[test]
    fn corrupt_record_names_revision() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.put(&rev(1, 3, 0)).unwrap();
        store.put(&rev(2, 3, 1)).unwrap();
        let path = dir.path().join("pages/3.revs");
        let data = fs::read_to_string(&path).unwrap();
        fs::write(&path, data.replace("body 2", "body X")).unwrap();
        match store.scan(3) {
            Err(StoreError::Corrupt { rev_id, .. }) => assert_eq!(rev_id, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_foreign_index() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("INDEX"), "something else\n").unwrap();
        assert!(matches!(Store::open(dir.path()), Err(StoreError::BadMagic { .. })));
    }

    #[test]
    fn concurrent_readers() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        for i in 0..20 {
            store.put(&rev(i, 1, (i % 24) as u32)).unwrap();
        }
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| assert_eq!(store.scan(1).unwrap().len(), 20));
            }
            s.spawn(|| store.put(&rev(99, 2, 0)).unwrap());
        });
        assert_eq!(store.len(), 21);
    }
}
