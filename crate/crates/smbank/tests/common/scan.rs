use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use base64::engine::general_purpose::URL_SAFE_NO_PAD;

/// Named secret byte strings and a pile of observed bytes to search.
#[derive(Default)]
pub struct Scanner {
    secrets: Vec<(String, Vec<u8>)>,
    corpus: Vec<(String, Vec<u8>)>,
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

fn collect_strings(v: &serde_json::Value, out: &mut Vec<String>) {
    match v {
        serde_json::Value::String(s) => out.push(s.clone()),
        serde_json::Value::Array(a) => a.iter().for_each(|x| collect_strings(x, out)),
        serde_json::Value::Object(o) => o.values().for_each(|x| collect_strings(x, out)),
        _ => {}
    }
}

impl Scanner {
    pub fn secret(&mut self, name: &str, bytes: &[u8]) {
        self.secrets.push((name.to_owned(), bytes.to_vec()));
    }

    /// Adds text, plus every decodable base-64, base-32 or hex string found
    /// in it when it is JSON or JSON lines.
    pub fn observe_text(&mut self, source: &str, text: &str) {
        self.observe_bytes(source, text.as_bytes());
        for line in text.lines() {
            let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else { continue };
            let mut strings = Vec::new();
            collect_strings(&v, &mut strings);
            for s in strings {
                for decoded in [
                    B64.decode(&s).ok(),
                    URL_SAFE_NO_PAD.decode(&s).ok(),
                    data_encoding::BASE32_NOPAD.decode(s.as_bytes()).ok(),
                    hex::decode(&s).ok(),
                ]
                .into_iter()
                .flatten()
                {
                    self.corpus.push((format!("{source} (decoded)"), decoded));
                }
            }
        }
    }

    pub fn observe_bytes(&mut self, source: &str, bytes: &[u8]) {
        self.corpus.push((source.to_owned(), bytes.to_vec()));
    }

    pub fn observe_dir(&mut self, dir: &Path) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                self.observe_dir(&path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                let name = path.display().to_string();
                match String::from_utf8(bytes) {
                    Ok(text) => self.observe_text(&name, &text),
                    Err(e) => self.observe_bytes(&name, e.as_bytes()),
                }
            }
        }
    }

    /// Every `(secret, source)` pair where some encoding of the secret
    /// shows up.
    pub fn findings(&self) -> Vec<(String, String)> {
        let mut hits = Vec::new();
        for (name, secret) in &self.secrets {
            let forms = [
                secret.clone(),
                hex::encode(secret).into_bytes(),
                hex::encode_upper(secret).into_bytes(),
                B64.encode(secret).trim_end_matches('=').as_bytes().to_vec(),
                data_encoding::BASE32_NOPAD.encode(secret).into_bytes(),
            ];
            for (source, hay) in &self.corpus {
                if forms.iter().any(|f| contains(hay, f)) {
                    hits.push((name.clone(), source.clone()));
                }
            }
        }
        hits.sort();
        hits.dedup();
        hits
    }

    pub fn corpus_len(&self) -> usize {
        self.corpus.iter().map(|(_, b)| b.len()).sum()
    }
}

#[derive(Clone, Default)]
pub struct LogBuffer(pub Arc<Mutex<Vec<u8>>>);

impl Write for LogBuffer {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// Routes every log event in this test binary, at every level, into one
/// in-memory buffer.
pub fn capture_logs() -> LogBuffer {
    static LOGS: OnceLock<LogBuffer> = OnceLock::new();
    LOGS.get_or_init(|| {
        let buf = LogBuffer::default();
        let writer = buf.clone();
        tracing_subscriber::fmt()
            .with_max_level(tracing::Level::TRACE)
            .with_ansi(false)
            .with_writer(move || writer.clone())
            .init();
        buf
    })
    .clone()
}

impl LogBuffer {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }
}
