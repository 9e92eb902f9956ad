//! Line-delimited corpus IO. Readers stream one record at a time;
//! writers are exclusive per destination.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FloraError, Result};
use crate::tokenize::TokenCounter;
use crate::types::{AugmentedSample, Domain, ShortSample};

/// Raw on-disk shape of a source record. `domain` and `id` are optional;
/// missing ids are synthesized from a content hash.
#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    instruction: String,
    #[serde(default)]
    input: String,
    response: String,
    domain: Option<String>,
}

fn parse_domain(s: &str) -> Domain {
    match s.to_ascii_lowercase().as_str() {
        "math" => Domain::Math,
        "code" | "coding" => Domain::Code,
        "general" | "general_knowledge" => Domain::General,
        _ => Domain::Unlabeled,
    }
}

pub fn content_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Streaming reader over a source corpus file.
pub struct CorpusReader {
    lines: std::io::Lines<BufReader<File>>,
    counter: TokenCounter,
    strict: bool,
    line_no: usize,
    seen_ids: HashSet<String>,
    pub skipped: usize,
}

impl CorpusReader {
    pub fn open(path: impl AsRef<Path>, counter: TokenCounter, strict: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| FloraError::io(path, e))?;
        Ok(CorpusReader {
            lines: BufReader::new(file).lines(),
            counter,
            strict,
            line_no: 0,
            seen_ids: HashSet::new(),
            skipped: 0,
        })
    }

    fn parse_line(&mut self, line: &str) -> Result<ShortSample> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| {
            FloraError::MalformedRecord {
                line: self.line_no,
                reason: e.to_string(),
            }
        })?;
        if raw.instruction.trim().is_empty() {
            return Err(FloraError::MalformedRecord {
                line: self.line_no,
                reason: "empty instruction".into(),
            });
        }
        if raw.response.trim().is_empty() {
            return Err(FloraError::MalformedRecord {
                line: self.line_no,
                reason: "empty response".into(),
            });
        }
        let id = raw.id.clone().unwrap_or_else(|| {
            let text = format!("{}\x1f{}\x1f{}", raw.instruction, raw.input, raw.response);
            format!("l{}-{}", self.line_no, content_hash(&text))
        });
        if !self.seen_ids.insert(id.clone()) {
            return Err(FloraError::DuplicateId {
                id,
                line: self.line_no,
            });
        }
        let full = format!("{}{}{}", raw.instruction, raw.input, raw.response);
        let domain = raw.domain.as_deref().map_or(Domain::Unlabeled, parse_domain);
        Ok(ShortSample {
            id,
            instruction: raw.instruction,
            input: raw.input,
            response: raw.response,
            domain,
            token_count: self.counter.count(&full),
        })
    }
}

impl Iterator for CorpusReader {
    type Item = Result<ShortSample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(FloraError::io("<stream>", e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_line(&line) {
                Ok(s) => return Some(Ok(s)),
                Err(e) if self.strict => return Some(Err(e)),
                Err(_) => {
                    self.skipped += 1;
                    continue;
                }
            }
        }
    }
}

/// Loads a whole corpus into memory. Lenient mode returns the skipped
/// line count alongside the samples.
pub fn load_corpus(
    path: impl AsRef<Path>,
    counter: &TokenCounter,
    strict: bool,
) -> Result<(Vec<ShortSample>, usize)> {
    let mut reader = CorpusReader::open(path, counter.clone(), strict)?;
    let mut out = Vec::new();
    for rec in reader.by_ref() {
        out.push(rec?);
    }
    Ok((out, reader.skipped))
}

/// Writes augmented samples one JSON record per line. Returns the count.
pub fn write_dataset<'a, I>(samples: I, path: impl AsRef<Path>) -> Result<usize>
where
    I: IntoIterator<Item = &'a AugmentedSample>,
{
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| FloraError::io(dir, e))?;
        }
    }
    let file = File::create(path).map_err(|e| FloraError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut count = 0;
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| FloraError::MalformedRecord {
            line: count + 1,
            reason: e.to_string(),
        })?;
        writeln!(w, "{line}").map_err(|e| FloraError::io(path, e))?;
        count += 1;
    }
    w.flush().map_err(|e| FloraError::io(path, e))?;
    Ok(count)
}

/// Streaming reader over an augmented dataset file.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<AugmentedSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FloraError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FloraError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AugmentedSample =
            serde_json::from_str(&line).map_err(|e| FloraError::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        out.push(rec);
    }
    Ok(out)
}

/// Sidecar manifest written next to every dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    pub record_count: usize,
    pub counter: String,
    pub config_hash: String,
    pub seed: u64,
}

pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut os = dataset.as_os_str().to_owned();
    os.push(".manifest");
    PathBuf::from(os)
}

impl Manifest {
    pub fn write(&self, dataset: &Path) -> Result<()> {
        let path = manifest_path(dataset);
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, body + "\n").map_err(|e| FloraError::io(&path, e))
    }

    pub fn read(dataset: &Path) -> Result<Manifest> {
        let path = manifest_path(dataset);
        let body = std::fs::read_to_string(&path).map_err(|e| FloraError::io(&path, e))?;
        serde_json::from_str(&body).map_err(|e| FloraError::MalformedRecord {
            line: 1,
            reason: e.to_string(),
        })
    }
}
