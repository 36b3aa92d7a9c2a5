//! Append-only JSON-lines account store.
//!
//! One object per line with the fields `username`, `salt` (hex),
//! `sealed_secret` (base-64), `phone`, `public_key` (hex) and `created_at`.
//! A trailing line that was cut short by a crash is moved to
//! `<store>.quarantine` on load and the file is truncated back to the last
//! complete record.

use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use smbank_core::protocol::{AccountRecord, SealedSecret};
use smbank_core::signcrypt::{GroupParams, PublicKey};
use smbank_core::terms::{Identity, PhoneNumber};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("store line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("store line {line}: duplicate username")]
    Duplicate { line: usize },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredRecord {
    username: String,
    salt: String,
    sealed_secret: String,
    phone: String,
    public_key: String,
    created_at: u64,
}

pub fn encode_record(r: &AccountRecord) -> String {
    let stored = StoredRecord {
        username: r.username.display_name(),
        salt: hex::encode(r.sealed_pbta_secret.salt),
        sealed_secret: B64.encode(&r.sealed_pbta_secret.blob),
        phone: r.phone.as_str().to_owned(),
        public_key: hex::encode(r.user_pk.to_bytes()),
        created_at: r.created_at,
    };
    serde_json::to_string(&stored).expect("plain struct serializes")
}

pub fn decode_record(line: &str, params: &Arc<GroupParams>) -> Result<AccountRecord, String> {
    let s: StoredRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let username = Identity::user(s.username.into_bytes()).map_err(|e| e.to_string())?;
    let mut salt = [0u8; 16];
    hex::decode_to_slice(&s.salt, &mut salt).map_err(|_| "salt must be 16 bytes of hex".to_owned())?;
    let blob = B64.decode(&s.sealed_secret).map_err(|_| "sealed_secret is not base-64".to_owned())?;
    let phone = PhoneNumber::new(&s.phone).map_err(|e| e.to_string())?;
    let pk_bytes = hex::decode(&s.public_key).map_err(|_| "public_key is not hex".to_owned())?;
    let user_pk =
        PublicKey::from_bytes(params.clone(), &pk_bytes, username.clone()).map_err(|e| e.to_string())?;
    Ok(AccountRecord {
        username,
        sealed_pbta_secret: SealedSecret { salt, blob },
        phone,
        user_pk,
        created_at: s.created_at,
    })
}

/// What [`AccountStore::open`] found on disk.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub records: Vec<AccountRecord>,
    /// Bytes moved to the quarantine file, if any.
    pub quarantined: Option<usize>,
}

/// Single writer; readers work from the records returned at open.
pub struct AccountStore {
    path: PathBuf,
    file: File,
}

impl AccountStore {
    pub fn quarantine_path(path: &Path) -> PathBuf {
        let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".quarantine");
        path.with_file_name(name)
    }

    /// Opens or creates the store, loading every record.
    pub fn open(path: &Path, params: &Arc<GroupParams>) -> Result<(Self, LoadReport), StoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let bytes = std::fs::read(path)?;
        let mut report = LoadReport::default();
        let mut names = std::collections::HashSet::new();
        let mut good_end = 0usize;
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < bytes.len() {
            line_no += 1;
            let rest = &bytes[offset..];
            let (line, complete) = match rest.iter().position(|&b| b == b'\n') {
                Some(i) => (&rest[..i], true),
                None => (rest, false),
            };
            let next = offset + line.len() + usize::from(complete);
            let last = next >= bytes.len();
            let parsed = std::str::from_utf8(line)
                .map_err(|_| "not utf-8".to_owned())
                .and_then(|l| decode_record(l, params));
            match parsed {
                Ok(rec) if complete => {
                    if !names.insert(rec.username.name().to_vec()) {
                        return Err(StoreError::Duplicate { line: line_no });
                    }
                    report.records.push(rec);
                    good_end = next;
                }
                // An unterminated or unparsable final line is a torn write.
                _ if last => {
                    let mut q = OpenOptions::new().create(true).append(true).open(Self::quarantine_path(path))?;
                    q.write_all(rest)?;
                    q.write_all(b"\n")?;
                    q.sync_all()?;
                    file.set_len(good_end as u64)?;
                    file.sync_all()?;
                    report.quarantined = Some(rest.len());
                    tracing::warn!(line = line_no, bytes = rest.len(), "quarantined torn store line");
                }
                Ok(_) => unreachable!("only the final line can lack a newline"),
                Err(reason) => return Err(StoreError::Corrupt { line: line_no, reason }),
            }
            offset = next;
        }
        file.seek(SeekFrom::End(0))?;
        Ok((AccountStore { path: path.to_path_buf(), file }, report))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one record as a single write followed by a data sync.
    pub fn append(&mut self, record: &AccountRecord) -> Result<(), StoreError> {
        let mut line = encode_record(record);
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use smbank_core::signcrypt::keygen;

    fn record(name: &str, rng: &mut StdRng) -> (Arc<GroupParams>, AccountRecord) {
        let params = Arc::new(GroupParams::toy());
        let id = Identity::user(name).unwrap();
        let (_, pk) = keygen(&params, id.clone(), rng).unwrap();
        let rec = AccountRecord {
            username: id,
            sealed_pbta_secret: SealedSecret { salt: [7; 16], blob: vec![1, 2, 3, 250] },
            phone: PhoneNumber::new("628123456789").unwrap(),
            user_pk: pk,
            created_at: 1_700_000_000,
        };
        (params, rec)
    }

    #[test]
    fn record_roundtrip_and_layout() {
        let mut rng = StdRng::seed_from_u64(1);
        let (params, rec) = record("alice", &mut rng);
        let line = encode_record(&rec);
        let keys: Vec<String> =
            serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&line).unwrap().keys().cloned().collect();
        let mut want = vec!["created_at", "phone", "public_key", "salt", "sealed_secret", "username"];
        want.sort();
        assert_eq!(keys, want);
        assert!(line.contains("\"sealed_secret\":\"AQID+g==\""));
        assert_eq!(decode_record(&line, &params).unwrap(), rec);
    }

    #[test]
    fn append_reload_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut rng = StdRng::seed_from_u64(2);
        let (params, a) = record("alice", &mut rng);
        let (_, b) = record("bob", &mut rng);
        {
            let (mut store, report) = AccountStore::open(&path, &params).unwrap();
            assert!(report.records.is_empty());
            store.append(&a).unwrap();
            store.append(&b).unwrap();
        }
        let (_, report) = AccountStore::open(&path, &params).unwrap();
        assert_eq!(report.records, vec![a.clone(), b]);
        assert_eq!(report.quarantined, None);

        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str(&encode_record(&a));
        text.push('\n');
        std::fs::write(&path, text).unwrap();
        assert!(matches!(AccountStore::open(&path, &params), Err(StoreError::Duplicate { line: 3 })));
    }

    #[test]
    fn torn_tail_is_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut rng = StdRng::seed_from_u64(3);
        let (params, a) = record("alice", &mut rng);
        let (_, b) = record("bob", &mut rng);
        let full = format!("{}\n", encode_record(&a));
        let torn = &encode_record(&b)[..30];
        std::fs::write(&path, format!("{full}{torn}")).unwrap();

        let (mut store, report) = AccountStore::open(&path, &params).unwrap();
        assert_eq!(report.records, vec![a]);
        assert_eq!(report.quarantined, Some(30));
        assert_eq!(std::fs::read_to_string(&path).unwrap(), full);
        let q = std::fs::read_to_string(AccountStore::quarantine_path(&path)).unwrap();
        assert_eq!(q, format!("{torn}\n"));

        store.append(&b).unwrap();
        drop(store);
        assert_eq!(AccountStore::open(&path, &params).unwrap().1.records.len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut rng = StdRng::seed_from_u64(4);
        let (params, a) = record("alice", &mut rng);
        std::fs::write(&path, format!("{{oops\n{}\n", encode_record(&a))).unwrap();
        assert!(matches!(AccountStore::open(&path, &params), Err(StoreError::Corrupt { line: 1, .. })));
    }
}
