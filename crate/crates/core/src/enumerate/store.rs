//! JSON Lines certificate store. The first line is a header naming the spec
//! and its fingerprint; every later line is one certificate.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::campaign::Certificate;
use super::spec::FamilySpec;
use super::EnumerateError;

pub const STORE_FORMAT: &str = "pinwheel-certificates";
pub const STORE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub format: String,
    pub version: u32,
    pub spec: FamilySpec,
    pub fingerprint: String,
}

impl StoreHeader {
    pub fn for_spec(spec: &FamilySpec) -> Self {
        StoreHeader {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
            spec: spec.clone(),
            fingerprint: spec.fingerprint(),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> EnumerateError + '_ {
    move |source| EnumerateError::Io { path: path.display().to_string(), source }
}

fn corrupt(path: &Path, line: usize, why: impl ToString) -> EnumerateError {
    EnumerateError::Corrupt { path: path.display().to_string(), line, why: why.to_string() }
}

struct Parsed {
    header: StoreHeader,
    certs: Vec<Certificate>,
    /// Byte length of the complete, well-formed part of the file.
    good_len: u64,
}

fn parse(path: &Path, mut file: &File) -> Result<Parsed, EnumerateError> {
    let mut raw = Vec::new();
    file.read_to_end(&mut raw).map_err(io_err(path))?;
    let mut reader = BufReader::new(raw.as_slice());
    let mut header: Option<StoreHeader> = None;
    let mut certs = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let complete = line.ends_with('\n');
        let text = line.trim_end();
        let ok = if lineno == 1 {
            serde_json::from_str::<StoreHeader>(text).map(|h| header = Some(h)).map_err(|e| e.to_string())
        } else {
            serde_json::from_str::<Certificate>(text).map(|c| certs.push(c)).map_err(|e| e.to_string())
        };
        match (ok, complete) {
            (Ok(()), true) => good_len += n as u64,
            (ok, false) => {
                // An interrupted final write; drop it.
                if lineno == 1 {
                    header = None;
                } else if ok.is_ok() {
                    certs.pop();
                }
                log::warn!("{}: dropping incomplete last line {lineno}", path.display());
                break;
            }
            (Err(why), true) => return Err(corrupt(path, lineno, why)),
        }
    }
    let header = header.ok_or_else(|| corrupt(path, 1, "missing header"))?;
    if header.format != STORE_FORMAT || header.version != STORE_VERSION {
        return Err(corrupt(path, 1, format!("unsupported format {} v{}", header.format, header.version)));
    }
    Ok(Parsed { header, certs, good_len })
}

/// Reads every complete certificate. A torn last line is ignored.
pub fn read_store(path: impl AsRef<Path>) -> Result<(StoreHeader, Vec<Certificate>), EnumerateError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let p = parse(path, &file)?;
    Ok((p.header, p.certs))
}

/// Append handle. Every write is flushed, so a killed campaign leaves at most
/// one torn line, which the next open removes.
pub struct CertificateStore {
    out: BufWriter<File>,
    path: String,
}

impl CertificateStore {
    /// Creates the store, or reopens it for `spec` and returns what it
    /// already holds.
    pub fn open(path: impl AsRef<Path>, spec: &FamilySpec) -> Result<(Self, Vec<Certificate>), EnumerateError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path).map_err(io_err(path))?;
        let len = file.metadata().map_err(io_err(path))?.len();
        let mut existing = Vec::new();
        if len == 0 {
            let mut head = serde_json::to_string(&StoreHeader::for_spec(spec)).expect("header serializes");
            head.push('\n');
            file.write_all(head.as_bytes()).map_err(io_err(path))?;
            file.flush().map_err(io_err(path))?;
        } else {
            let p = parse(path, &file)?;
            let expected = spec.fingerprint();
            if p.header.fingerprint != expected || p.header.spec.fingerprint() != expected {
                return Err(EnumerateError::FingerprintMismatch {
                    path: path.display().to_string(),
                    expected: spec.name.clone(),
                    found: p.header.spec.name.clone(),
                });
            }
            if p.good_len < len {
                file.set_len(p.good_len).map_err(io_err(path))?;
            }
            existing = p.certs;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
        let store = CertificateStore { out: BufWriter::new(file), path: path.display().to_string() };
        Ok((store, existing))
    }

    pub fn append(&mut self, cert: &Certificate) -> Result<(), EnumerateError> {
        let line = serde_json::to_string(cert).expect("certificate serializes");
        let wrap = |source| EnumerateError::Io { path: self.path.clone(), source };
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(wrap)
    }
}
