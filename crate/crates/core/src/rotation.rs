//! Parameter rotation.
//!
//! The active parameters live in a one-line settings file holding
//! `p,q,m,n,z,w`. Rotating draws a fresh tuple and re-encrypts every ledger
//! record under it. The new ledger and settings are staged next to the live
//! files and renamed into place only after every record re-encrypted cleanly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;

use crate::cipher::{encrypt_amount, CryptoParams, MAX_BASE, MAX_EXPONENT};
use crate::codec::SCHEME_COUNT;
use crate::error::{Error, Result};
use crate::store::{self, Ledger, RecordKey};

/// Hard cap on candidate draws in [`next_params`].
pub const MAX_GENERATION_DRAWS: usize = 10_000;

/// Parses `p,q,m,n,z,w`. Surrounding whitespace, including a trailing
/// newline, is ignored.
pub fn parse_settings(s: &str) -> Result<CryptoParams> {
    let fields: Vec<&str> = s.trim().split(',').map(str::trim).collect();
    if fields.len() != 6 {
        return Err(Error::SettingsFormat(s.to_owned()));
    }
    let mut values = [0u32; 6];
    for (slot, field) in values.iter_mut().zip(&fields) {
        *slot = field
            .parse()
            .map_err(|_| Error::SettingsFormat(s.to_owned()))?;
    }
    let [p, q, m, n, z, w] = values;
    CryptoParams::new(p, q, m, n, z, w).map_err(|e| match e {
        Error::InvalidParams(msg) => Error::SettingsRange(msg),
        other => other,
    })
}

pub fn serialize_settings(params: &CryptoParams) -> String {
    params.to_string()
}

/// The settings file: one line, `p,q,m,n,z,w\n`.
#[derive(Debug, Clone)]
pub struct SettingsFile {
    path: PathBuf,
}

impl SettingsFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SettingsFile { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<CryptoParams> {
        parse_settings(&fs::read_to_string(&self.path)?)
    }

    /// Loads the settings, or returns the demo tuple when the file does not exist.
    pub fn load_or_demo(&self) -> Result<CryptoParams> {
        match fs::read_to_string(&self.path) {
            Ok(s) => parse_settings(&s),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(CryptoParams::demo()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, params: &CryptoParams) -> Result<()> {
        store::write_atomic(&self.path, Self::contents(params).as_bytes())
    }

    fn contents(params: &CryptoParams) -> String {
        format!("{}\n", serialize_settings(params))
    }
}

/// Draws the next parameter tuple.
///
/// Exponents are uniform in `0..=4` and redrawn together while both are 0.
/// Bases are uniform in `1..=50` and redrawn while equal or while
/// `n^p = m^q = 1`. Scheme ids are uniform in `1..=15`. The whole tuple is
/// redrawn if it repeats `prev`. The sign is always `+`.
pub fn next_params<R: Rng + ?Sized>(prev: &CryptoParams, rng: &mut R) -> Result<CryptoParams> {
    let mut draws = 0usize;
    let mut tick = || {
        draws += 1;
        if draws > MAX_GENERATION_DRAWS {
            Err(Error::RotationGenerationFailure(MAX_GENERATION_DRAWS))
        } else {
            Ok(())
        }
    };
    loop {
        tick()?;
        let p = rng.random_range(0..=MAX_EXPONENT);
        let q = rng.random_range(0..=MAX_EXPONENT);
        if p == 0 && q == 0 {
            continue;
        }
        let (n, m) = loop {
            tick()?;
            let n = rng.random_range(1..=MAX_BASE);
            let m = rng.random_range(1..=MAX_BASE);
            let unit = (n as u64).pow(p) == 1 && (m as u64).pow(q) == 1;
            if n != m && !unit {
                break (n, m);
            }
        };
        let z = rng.random_range(1..=SCHEME_COUNT as u32);
        let w = rng.random_range(1..=SCHEME_COUNT as u32);
        let next = CryptoParams::new(p, q, m, n, z, w)?;
        if next.tuple() != prev.tuple() {
            return Ok(next);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RotationFailure {
    /// The offending record, or `None` for failures not tied to one record.
    pub key: Option<RecordKey>,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct RotationReport {
    pub records_processed: usize,
    pub old_params: CryptoParams,
    pub new_params: CryptoParams,
    pub failures: Vec<RotationFailure>,
    pub elapsed: Duration,
}

impl RotationReport {
    /// True when the new ledger and settings were written.
    pub fn committed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-encrypts every record from `old` to `new` and commits ledger and settings.
pub fn rotate_ledger(
    ledger: &mut Ledger,
    settings: &SettingsFile,
    old: &CryptoParams,
    new: &CryptoParams,
) -> RotationReport {
    rotate_ledger_with(ledger, settings, old, new, |_, _| Ok(()))
}

/// [`rotate_ledger`] with a hook called before each record is processed.
/// An error from the hook aborts the rotation like any record failure.
pub fn rotate_ledger_with<F>(
    ledger: &mut Ledger,
    settings: &SettingsFile,
    old: &CryptoParams,
    new: &CryptoParams,
    mut before_record: F,
) -> RotationReport
where
    F: FnMut(usize, &RecordKey) -> Result<()>,
{
    let start = Instant::now();
    let mut report = RotationReport {
        records_processed: 0,
        old_params: *old,
        new_params: *new,
        failures: Vec::new(),
        elapsed: Duration::ZERO,
    };
    let fail = |report: &mut RotationReport, key: Option<RecordKey>, e: Error| {
        report.failures.push(RotationFailure {
            key,
            error: e.to_string(),
        });
    };
    for p in [old, new] {
        if let Err(e) = p.validate() {
            fail(&mut report, None, e);
        }
    }
    if !report.failures.is_empty() {
        report.elapsed = start.elapsed();
        return report;
    }

    let mut rotated = Vec::with_capacity(ledger.len());
    for (i, record) in ledger.records().iter().enumerate() {
        let key = record.key().expect("keys validated on load and insert");
        let result = before_record(i, &key).and_then(|()| {
            let amount = record.decrypt(old)?;
            let keys = record.context()?.keys(new)?;
            encrypt_amount(&amount, &keys, new)
        });
        match result {
            Ok(ct) => {
                let mut r = record.clone();
                r.amount = ct;
                rotated.push(r);
                report.records_processed += 1;
            }
            Err(e) => {
                fail(&mut report, Some(key), e);
                report.elapsed = start.elapsed();
                return report;
            }
        }
    }

    let mut staged = ledger.clone();
    staged.replace_records(rotated);
    if let Err(e) = commit(&staged, settings, new) {
        fail(&mut report, None, e);
    } else {
        *ledger = staged;
    }
    report.elapsed = start.elapsed();
    report
}

fn commit(ledger: &Ledger, settings: &SettingsFile, new: &CryptoParams) -> Result<()> {
    let ledger_tmp = store::stage(ledger.path(), &ledger.to_bytes())?;
    let settings_tmp = match store::stage(settings.path(), SettingsFile::contents(new).as_bytes()) {
        Ok(t) => t,
        Err(e) => {
            let _ = fs::remove_file(&ledger_tmp);
            return Err(e.into());
        }
    };
    if let Err(e) = store::commit_staged(&ledger_tmp, ledger.path()) {
        let _ = fs::remove_file(&ledger_tmp);
        let _ = fs::remove_file(&settings_tmp);
        return Err(e.into());
    }
    store::commit_staged(&settings_tmp, settings.path())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::parse_amount;
    use crate::store::NewPayment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_examples() {
        assert_eq!(parse_settings("0,0,1,1,1,1").unwrap(), CryptoParams::demo());
        assert_eq!(parse_settings("0,0,1,1,1,1\n").unwrap(), CryptoParams::demo());
        let p = parse_settings("2,1,7,3,5,9").unwrap();
        assert_eq!((p.p, p.q, p.m, p.n, p.z, p.w), (2, 1, 7, 3, 5, 9));
        assert!(matches!(parse_settings("1,2,3"), Err(Error::SettingsFormat(_))));
        assert!(matches!(parse_settings("1,2,3,4,5,x"), Err(Error::SettingsFormat(_))));
        assert!(matches!(parse_settings("1,2,3,4,5,-1"), Err(Error::SettingsFormat(_))));
        assert!(matches!(parse_settings("5,0,1,2,1,1"), Err(Error::SettingsRange(_))));
        assert!(matches!(parse_settings("1,0,3,3,1,1"), Err(Error::SettingsRange(_))));
    }

    #[test]
    fn serialize_examples() {
        assert_eq!(serialize_settings(&CryptoParams::demo()), "0,0,1,1,1,1");
        let p = CryptoParams::new(2, 1, 7, 3, 5, 9).unwrap();
        assert_eq!(serialize_settings(&p), "2,1,7,3,5,9");
        let b = CryptoParams::new(0, 4, 50, 49, 15, 15).unwrap();
        assert_eq!(serialize_settings(&b), "0,4,50,49,15,15");
        assert_eq!(parse_settings(&serialize_settings(&b)).unwrap(), b);
    }

    #[test]
    fn settings_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sf = SettingsFile::new(dir.path().join("settings"));
        assert_eq!(sf.load_or_demo().unwrap(), CryptoParams::demo());
        assert!(sf.load().is_err());
        let p = CryptoParams::new(2, 1, 7, 3, 5, 9).unwrap();
        sf.save(&p).unwrap();
        assert_eq!(fs::read_to_string(sf.path()).unwrap(), "2,1,7,3,5,9\n");
        assert_eq!(sf.load().unwrap(), p);
    }

    #[test]
    fn seeded_generator_is_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(2012);
        let next = next_params(&CryptoParams::demo(), &mut rng).unwrap();
        assert_eq!(next.to_string(), GOLDEN_SEED_2012);
        next.validate().unwrap();
        assert!(!next.is_demo());
    }

    const GOLDEN_SEED_2012: &str = "3,1,47,46,5,15";

    #[test]
    fn generator_never_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut prev = CryptoParams::demo();
        for _ in 0..2_000 {
            let next = next_params(&prev, &mut rng).unwrap();
            assert_ne!(next.tuple(), prev.tuple());
            assert!(!(next.p == 0 && next.q == 0));
            assert_ne!(next.m, next.n);
            prev = next;
        }
    }

    #[test]
    fn generator_gives_up_on_a_stuck_source() {
        // a source that only ever yields the bottom of each range draws p = q = 0 forever
        struct Zero;
        impl rand::RngCore for Zero {
            fn next_u32(&mut self) -> u32 {
                0
            }
            fn next_u64(&mut self) -> u64 {
                0
            }
            fn fill_bytes(&mut self, dst: &mut [u8]) {
                dst.fill(0)
            }
        }
        assert!(matches!(
            next_params(&CryptoParams::demo(), &mut Zero),
            Err(Error::RotationGenerationFailure(_))
        ));
    }

    fn one_record_ledger(dir: &Path) -> Ledger {
        let mut ledger = Ledger::new(dir.join("ledger.jsonl"));
        ledger
            .add_payment(
                NewPayment {
                    stdid: "S1".into(),
                    date: "21/05/12".into(),
                    time: "15:50:08".into(),
                    cashierid: "CE840716".into(),
                    ..Default::default()
                },
                &parse_amount("50.00").unwrap(),
                &CryptoParams::demo(),
            )
            .unwrap();
        ledger
    }

    #[test]
    fn rotates_worked_example() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = one_record_ledger(dir.path());
        assert_eq!(ledger.records()[0].amount.as_str(), "+Rp(");
        let settings = SettingsFile::new(dir.path().join("settings"));
        let new = parse_settings("1,0,1,2,1,1").unwrap();
        let report = rotate_ledger(&mut ledger, &settings, &CryptoParams::demo(), &new);
        assert!(report.committed(), "{:?}", report.failures);
        assert_eq!(report.records_processed, 1);
        assert_eq!(settings.load().unwrap(), new);
        let reloaded = store::load_ledger(ledger.path()).unwrap();
        assert_ne!(reloaded.records()[0].amount.as_str(), "+Rp(");
        assert_eq!(reloaded.records()[0].decrypt(&new).unwrap().to_string(), "50.00");
        // stale parameters still pass the divisibility check here, but give the wrong amount
        let stale = reloaded.records()[0].decrypt(&CryptoParams::demo()).unwrap();
        assert_eq!(stale.to_string(), "100.00");
    }

    #[test]
    fn corrupted_record_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = one_record_ledger(dir.path());
        let key = ledger.records()[0].key().unwrap();
        *ledger.amount_mut(&key).unwrap() = "+Ap(".parse().unwrap();
        store::save_ledger(&ledger).unwrap();
        let before = fs::read(ledger.path()).unwrap();
        let settings = SettingsFile::new(dir.path().join("settings"));
        settings.save(&CryptoParams::demo()).unwrap();
        let new = parse_settings("1,0,1,2,1,1").unwrap();
        let report = rotate_ledger(&mut ledger, &settings, &CryptoParams::demo(), &new);
        assert!(!report.committed());
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].key.as_ref(), Some(&key));
        assert_eq!(fs::read(ledger.path()).unwrap(), before);
        assert_eq!(settings.load().unwrap(), CryptoParams::demo());
        assert_eq!(ledger.records()[0].amount.as_str(), "+Ap(");
    }

    #[test]
    fn empty_ledger_still_updates_settings() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = Ledger::new(dir.path().join("ledger.jsonl"));
        let settings = SettingsFile::new(dir.path().join("settings"));
        let new = parse_settings("2,1,7,3,5,9").unwrap();
        let report = rotate_ledger(&mut ledger, &settings, &CryptoParams::demo(), &new);
        assert!(report.committed());
        assert_eq!(report.records_processed, 0);
        assert_eq!(settings.load().unwrap(), new);
    }

    #[test]
    fn storage_failure_leaves_ledger_alone() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = one_record_ledger(dir.path());
        let before = fs::read(ledger.path()).unwrap();
        let settings = SettingsFile::new(dir.path().join("missing-dir").join("settings"));
        let new = parse_settings("1,0,1,2,1,1").unwrap();
        let report = rotate_ledger(&mut ledger, &settings, &CryptoParams::demo(), &new);
        assert!(!report.committed());
        assert!(report.failures[0].key.is_none());
        assert_eq!(fs::read(ledger.path()).unwrap(), before);
        assert_eq!(ledger.records()[0].amount.as_str(), "+Rp(");
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(leftovers.len(), 1, "{leftovers:?}");
    }
}
