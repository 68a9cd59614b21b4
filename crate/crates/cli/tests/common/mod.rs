//! Shared helpers: running the binary, synthetic histories, a tiny HTTP client.
#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sentqual"))
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "sentqual {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const WORDS: &[&str] = &[
    "river", "castle", "council", "railway", "harbour", "market", "church", "bridge", "school", "festival", "mill",
    "village", "museum", "estate", "tower", "garden", "station", "forest", "quarry", "library",
];
const VERBS: &[&str] = &["opened", "closed", "expanded", "moved", "grew", "declined", "reopened", "merged"];
const INSERTS: &[&str] = &[
    "briefly",
    "in the north",
    "after a long dispute",
    "for the first time",
    "under new ownership",
    "according to local records",
];
const COMMENTS: &[&str] = &["copyedit", "expand", "clarify", "fix pov", "add source", "tidy", "rv", "update"];

fn sentence(rng: &mut ChaCha8Rng, n: usize) -> String {
    let a = WORDS[rng.random_range(0..WORDS.len())];
    let b = WORDS[rng.random_range(0..WORDS.len())];
    let v = VERBS[rng.random_range(0..VERBS.len())];
    format!("The {a} {v} near the {b} in {}.", 1800 + (n * 7 + rng.random_range(0..50)) % 220)
}

fn article(rng: &mut ChaCha8Rng, title: &str) -> Vec<String> {
    let mut lines = vec![format!("'''{title}''' is a place. {}", sentence(rng, 0))];
    for s in 0..4 {
        lines.push(String::new());
        lines.push(format!("== Part {s} =="));
        let para: Vec<String> = (0..4).map(|k| sentence(rng, s * 10 + k)).collect();
        lines.push(para.join(" "));
    }
    lines
}

/// One small edit to a random prose line.
fn mutate(rng: &mut ChaCha8Rng, lines: &mut [String]) {
    let prose: Vec<usize> = (0..lines.len())
        .filter(|&i| !lines[i].is_empty() && !lines[i].starts_with("=="))
        .collect();
    let i = prose[rng.random_range(0..prose.len())];
    let line = &mut lines[i];
    let words: Vec<&str> = line.split(' ').collect();
    let at = rng.random_range(1..words.len());
    match rng.random_range(0..4) {
        0 => {
            let mut w = words.clone();
            w.insert(at, INSERTS[rng.random_range(0..INSERTS.len())]);
            *line = w.join(" ");
        }
        1 => {
            let end = line.find('.').unwrap_or(line.len());
            line.insert_str(end + 1, &format!("<ref>Source {}</ref>", rng.random_range(0..1000)));
        }
        2 => {
            let mut w: Vec<String> = words.iter().map(|s| s.to_string()).collect();
            w[at] = WORDS[rng.random_range(0..WORDS.len())].to_string();
            *line = w.join(" ");
        }
        _ => {
            line.push(' ');
            line.push_str(&sentence(rng, at));
        }
    }
}

pub struct SynthRevision {
    pub rev_id: u64,
    pub page_id: u64,
    pub title: String,
    pub timestamp: String,
    pub comment: String,
    pub text: String,
}

/// Deterministic page histories with occasional identity reverts.
pub fn synthetic_history(pages: usize, revisions_per_page: usize, seed: u64) -> Vec<SynthRevision> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap();
    let mut out = Vec::with_capacity(pages * revisions_per_page);
    let mut rev_id = 1u64;
    for p in 0..pages {
        let title = format!("Place {p}");
        let mut lines = article(&mut rng, &title);
        let mut history: Vec<String> = Vec::new();
        let mut t = t0 + Duration::days(p as i64);
        for r in 0..revisions_per_page {
            if r > 0 {
                if history.len() > 2 && rng.random_bool(0.05) {
                    let back = history[history.len() - 2].clone();
                    lines = back.split('\n').map(str::to_string).collect();
                } else {
                    mutate(&mut rng, &mut lines);
                }
            }
            let text = lines.join("\n");
            history.push(text.clone());
            t += Duration::minutes(rng.random_range(5..600));
            out.push(SynthRevision {
                rev_id,
                page_id: 1000 + p as u64,
                title: title.clone(),
                timestamp: t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                comment: COMMENTS[rng.random_range(0..COMMENTS.len())].to_string(),
                text,
            });
            rev_id += 1;
        }
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_dump(path: &Path, revs: &[SynthRevision]) {
    let mut out = String::from("<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\" version=\"0.10\">\n");
    let mut i = 0;
    while i < revs.len() {
        let page = revs[i].page_id;
        out.push_str(&format!(
            "  <page>\n    <title>{}</title>\n    <ns>0</ns>\n    <id>{page}</id>\n",
            xml_escape(&revs[i].title)
        ));
        while i < revs.len() && revs[i].page_id == page {
            let r = &revs[i];
            out.push_str(&format!(
                "    <revision>\n      <id>{}</id>\n      <timestamp>{}</timestamp>\n      <comment>{}</comment>\n      <text xml:space=\"preserve\">{}</text>\n    </revision>\n",
                r.rev_id,
                r.timestamp,
                xml_escape(&r.comment),
                xml_escape(&r.text)
            ));
            i += 1;
        }
        out.push_str("  </page>\n");
    }
    out.push_str("</mediawiki>\n");
    std::fs::write(path, out).unwrap();
}

pub fn write_jsonl(path: &Path, revs: &[SynthRevision]) {
    let mut out = String::new();
    for r in revs {
        let v = serde_json::json!({
            "rev_id": r.rev_id,
            "page_id": r.page_id,
            "page_title": r.title,
            "timestamp": r.timestamp,
            "comment": r.comment,
            "text": r.text,
        });
        out.push_str(&v.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

/// Minimal HTTP/1.1 exchange; returns status and body.
pub fn http(addr: &str, method: &str, path: &str, body: Option<&str>) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).expect("service reachable");
    let payload = body.unwrap_or("");
    let mut req = format!("{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n");
    if body.is_some() {
        req.push_str(&format!("Content-Type: application/json\r\nContent-Length: {}\r\n", payload.len()));
    }
    req.push_str("\r\n");
    req.push_str(payload);
    stream.write_all(req.as_bytes()).unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let text = String::from_utf8(raw).unwrap();
    let (head, rest) = text.split_once("\r\n\r\n").expect("http response");
    let status: u16 = head.split(' ').nth(1).unwrap().parse().unwrap();
    let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
    let body = if chunked { dechunk(rest) } else { rest.to_string() };
    (status, body)
}

fn dechunk(mut rest: &str) -> String {
    let mut out = String::new();
    loop {
        let (size, tail) = rest.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&tail[..n]);
        rest = &tail[n + 2..];
    }
}

/// A running `sentqual serve` child process, killed on drop.
pub struct Service {
    child: std::process::Child,
    pub addr: String,
}

impl Service {
    pub fn start(config: &Path) -> Service {
        use std::io::BufRead;
        let mut child = bin()
            .args(["serve", "--config"])
            .arg(config)
            .stderr(std::process::Stdio::piped())
            .spawn()
            .expect("serve starts");
        let mut stderr = std::io::BufReader::new(child.stderr.take().unwrap());
        let mut line = String::new();
        stderr.read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .rsplit("http://")
            .next()
            .filter(|_| line.contains("listening"))
            .unwrap_or_else(|| panic!("unexpected serve output {line:?}"))
            .to_string();
        std::thread::spawn(move || {
            let mut sink = String::new();
            while stderr.read_line(&mut sink).is_ok_and(|n| n > 0) {
                sink.clear();
            }
        });
        Service { child, addr }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
