//! File-backed payment ledger.
//!
//! One JSON object per line, UTF-8, every line terminated by `\n`:
//!
//! ```text
//! {"stdid":"S1","date":"21/05/12","time":"15:50:08","term":"1","acyear":"2012","receiptnumber":"R1","mode":"cash","cashierid":"CE840716","amount":"+Rp("}
//! ```
//!
//! Field order is fixed. Amounts are only ever stored encrypted, under keys
//! derived from the record's own date, time and cashier id. Ciphertext
//! symbols include space, `"` and `\`, which the JSON string escaping keeps
//! from acting as delimiters.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cipher::{decrypt_amount, encrypt_amount, Ciphertext, CryptoParams};
use crate::codec::char_value_scheme;
use crate::error::{Error, Result};
use crate::keys::{
    parse_record_date, parse_record_time, validate_cashier_id, Amount, CashierId, KeyPair,
    RecordDate, RecordTime,
};

/// Primary key of a payment: student id, date and time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub stdid: String,
    pub date: RecordDate,
    pub time: RecordTime,
}

impl RecordKey {
    pub fn new(stdid: impl Into<String>, date: RecordDate, time: RecordTime) -> Self {
        RecordKey {
            stdid: stdid.into(),
            date,
            time,
        }
    }
}

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.stdid, self.date, self.time)
    }
}

/// One ledger row as persisted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentRecord {
    pub stdid: String,
    pub date: String,
    pub time: String,
    pub term: String,
    pub acyear: String,
    pub receiptnumber: String,
    pub mode: String,
    pub cashierid: String,
    pub amount: Ciphertext,
}

/// Parsed key-bearing fields of a record.
#[derive(Debug, Clone)]
pub struct RecordContext {
    pub date: RecordDate,
    pub time: RecordTime,
    pub cashier: CashierId,
}

impl RecordContext {
    pub fn keys(&self, params: &CryptoParams) -> Result<KeyPair> {
        KeyPair::derive(&self.date, &self.time, &self.cashier, char_value_scheme(params.z)?)
    }
}

impl PaymentRecord {
    pub fn context(&self) -> Result<RecordContext> {
        Ok(RecordContext {
            date: parse_record_date(&self.date)?,
            time: parse_record_time(&self.time)?,
            cashier: validate_cashier_id(&self.cashierid)?,
        })
    }

    pub fn key(&self) -> Result<RecordKey> {
        Ok(RecordKey::new(
            self.stdid.clone(),
            parse_record_date(&self.date)?,
            parse_record_time(&self.time)?,
        ))
    }

    /// Decrypts this record's amount with keys from its own fields.
    pub fn decrypt(&self, params: &CryptoParams) -> Result<Amount> {
        let keys = self.context()?.keys(params)?;
        decrypt_amount(&self.amount, &keys, params)
    }

    /// Canonical line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("string fields always serialize")
    }
}

/// Everything about a payment except its amount.
#[derive(Debug, Clone, Default)]
pub struct NewPayment {
    pub stdid: String,
    pub date: String,
    pub time: String,
    pub term: String,
    pub acyear: String,
    pub receiptnumber: String,
    pub mode: String,
    pub cashierid: String,
}

/// Outcome of checking every record's integrity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerificationReport {
    pub ok: Vec<RecordKey>,
    pub tampered: Vec<RecordKey>,
    /// Records that fail for reasons other than the divisibility check,
    /// such as symbols outside the codebook.
    pub undecodable: Vec<(RecordKey, String)>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.tampered.is_empty() && self.undecodable.is_empty()
    }

    pub fn total(&self) -> usize {
        self.ok.len() + self.tampered.len() + self.undecodable.len()
    }
}

#[derive(Debug, Clone)]
pub struct Ledger {
    path: PathBuf,
    records: Vec<PaymentRecord>,
    index: HashMap<RecordKey, usize>,
}

impl Ledger {
    /// An empty ledger bound to `path`; nothing is written until a save or add.
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Ledger {
            path: path.into(),
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Loads `path` if it exists, otherwise starts empty.
    pub fn open_or_create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if path.exists() {
            load_ledger(&path)
        } else {
            Ok(Ledger::new(path))
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[PaymentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &RecordKey) -> Option<&PaymentRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    /// Canonical file contents.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for r in &self.records {
            out.extend_from_slice(r.to_line().as_bytes());
            out.push(b'\n');
        }
        out
    }

    /// Encrypts and inserts a payment in memory only.
    pub fn insert(
        &mut self,
        fields: NewPayment,
        amount: &Amount,
        params: &CryptoParams,
    ) -> Result<&PaymentRecord> {
        let ctx = RecordContext {
            date: parse_record_date(&fields.date)?,
            time: parse_record_time(&fields.time)?,
            cashier: validate_cashier_id(&fields.cashierid)?,
        };
        let key = RecordKey::new(fields.stdid.clone(), ctx.date, ctx.time);
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateKey(key));
        }
        let ct = encrypt_amount(amount, &ctx.keys(params)?, params)?;
        let record = PaymentRecord {
            stdid: fields.stdid,
            date: fields.date,
            time: fields.time,
            term: fields.term,
            acyear: fields.acyear,
            receiptnumber: fields.receiptnumber,
            mode: fields.mode,
            cashierid: fields.cashierid,
            amount: ct,
        };
        self.index.insert(key, self.records.len());
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Encrypts a payment, inserts it and appends it to the ledger file.
    pub fn add_payment(
        &mut self,
        fields: NewPayment,
        amount: &Amount,
        params: &CryptoParams,
    ) -> Result<&PaymentRecord> {
        self.insert(fields, amount, params)?;
        let line = self.records.last().expect("just inserted").to_line();
        let appended = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .and_then(|mut f| {
                f.write_all(format!("{line}\n").as_bytes())?;
                f.sync_data()
            });
        if let Err(e) = appended {
            let r = self.records.pop().expect("just inserted");
            self.index.remove(&r.key().expect("validated on insert"));
            return Err(e.into());
        }
        Ok(self.records.last().expect("just inserted"))
    }

    pub fn get_amount(&self, key: &RecordKey, params: &CryptoParams) -> Result<Amount> {
        self.get(key)
            .ok_or_else(|| Error::NotFound(key.clone()))?
            .decrypt(params)
    }

    pub fn verify(&self, params: &CryptoParams) -> VerificationReport {
        verify_ledger(self, params)
    }

    /// Replaces the records wholesale. Used by rotation after a successful
    /// re-encryption; keys are unchanged so the index stays valid.
    pub(crate) fn replace_records(&mut self, records: Vec<PaymentRecord>) {
        debug_assert_eq!(records.len(), self.records.len());
        self.records = records;
    }

    /// Direct mutable access to a stored ciphertext, for fault-injection tests.
    #[doc(hidden)]
    pub fn amount_mut(&mut self, key: &RecordKey) -> Option<&mut Ciphertext> {
        let i = *self.index.get(key)?;
        Some(&mut self.records[i].amount)
    }
}

/// Attempts to decrypt every record and partitions the results.
pub fn verify_ledger(ledger: &Ledger, params: &CryptoParams) -> VerificationReport {
    let mut report = VerificationReport::default();
    for r in &ledger.records {
        let key = r.key().expect("keys validated on load and insert");
        match r.decrypt(params) {
            Ok(_) => report.ok.push(key),
            Err(Error::TamperDetected) => report.tampered.push(key),
            Err(e) => report.undecodable.push((key, e.to_string())),
        }
    }
    report
}

pub fn load_ledger(path: impl AsRef<Path>) -> Result<Ledger> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_ledger(path, &text)
}

fn parse_ledger(path: &Path, text: &str) -> Result<Ledger> {
    let malformed = |line: usize, reason: String| Error::MalformedRecordLine {
        path: path.to_owned(),
        line,
        reason,
    };
    let mut ledger = Ledger::new(path);
    if text.is_empty() {
        return Ok(ledger);
    }
    let Some(body) = text.strip_suffix('\n') else {
        let last = text.lines().count();
        return Err(malformed(last, "missing trailing newline".into()));
    };
    for (i, line) in body.split('\n').enumerate() {
        let lineno = i + 1;
        let record: PaymentRecord =
            serde_json::from_str(line).map_err(|e| malformed(lineno, e.to_string()))?;
        let key = record.key().map_err(|e| malformed(lineno, e.to_string()))?;
        validate_cashier_id(&record.cashierid).map_err(|e| malformed(lineno, e.to_string()))?;
        if ledger.index.contains_key(&key) {
            return Err(Error::DuplicateKey(key));
        }
        ledger.index.insert(key, ledger.records.len());
        ledger.records.push(record);
    }
    Ok(ledger)
}

/// Rewrites the whole ledger file atomically.
pub fn save_ledger(ledger: &Ledger) -> Result<()> {
    write_atomic(&ledger.path, &ledger.to_bytes())
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp-{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` to a sibling temporary file that [`commit_staged`] renames over `path`.
pub(crate) fn stage(path: &Path, bytes: &[u8]) -> io::Result<PathBuf> {
    let tmp = temp_path(path);
    let written = File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    match written {
        Ok(()) => Ok(tmp),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub(crate) fn commit_staged(tmp: &Path, path: &Path) -> io::Result<()> {
    fs::rename(tmp, path)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = stage(path, bytes)?;
    commit_staged(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        e.into()
    })
}

/// Exclusive writer lock on a ledger file, held as a sibling `.lock` file.
#[derive(Debug)]
pub struct LedgerLock {
    path: PathBuf,
}

impl LedgerLock {
    pub fn acquire(ledger_path: impl AsRef<Path>) -> Result<Self> {
        let ledger_path = ledger_path.as_ref();
        let mut name = ledger_path.file_name().unwrap_or_default().to_os_string();
        name.push(".lock");
        let path = ledger_path.with_file_name(name);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(LedgerLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(Error::LedgerLocked(ledger_path.to_owned()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LedgerLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
