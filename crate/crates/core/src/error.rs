use std::io;
use std::path::PathBuf;

use crate::codec::SchemeKind;
use crate::store::RecordKey;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{kind} scheme id {id} is outside 1..=15")]
    SchemeIdOutOfRange { kind: SchemeKind, id: u32 },
    #[error("digit string has odd length {0}")]
    OddLengthInput(usize),
    #[error("invalid digit {0:?}")]
    InvalidDigit(char),
    #[error("symbol {0:?} is not in the codebook")]
    UnknownSymbol(char),
    #[error("input is empty")]
    EmptyInput,

    #[error("malformed date {0:?}, expected dd-mm-yy or dd/mm/yy")]
    DateFormat(String),
    #[error("date {0:?} has an element out of range")]
    DateRange(String),
    #[error("malformed time {0:?}, expected HH:MM:SS")]
    TimeFormat(String),
    #[error("time {0:?} has an element out of range")]
    TimeRange(String),
    #[error("cashier id {0:?} must contain only A-Z and 0-9")]
    CashierIdChar(String),
    #[error("cashier id {id:?} must be {min}..={max} characters long")]
    CashierIdLength { id: String, min: usize, max: usize },
    #[error("malformed amount {0:?}, expected digits '.' two digits")]
    AmountFormat(String),
    #[error("date and time produce K1 = 0 and cannot key an encryption")]
    DegenerateTimestamp,

    #[error("invalid crypto parameters: {0}")]
    InvalidParams(String),
    #[error("intermediate value exceeds the width bound")]
    AmountTooLarge,
    #[error("first encryption step is not positive")]
    NegativeIntermediate,
    #[error("ciphertext needs at least two symbols, got {0}")]
    CiphertextTooShort(usize),
    #[error("integrity check failed: the stored value has been changed")]
    TamperDetected,

    #[error("settings must be six comma-separated integers p,q,m,n,z,w: {0:?}")]
    SettingsFormat(String),
    #[error("settings value out of range: {0}")]
    SettingsRange(String),
    #[error("no new parameter tuple found after {0} draws")]
    RotationGenerationFailure(usize),

    #[error("record {0} already exists")]
    DuplicateKey(RecordKey),
    #[error("record {0} not found")]
    NotFound(RecordKey),
    #[error("{path}:{line}: {reason}")]
    MalformedRecordLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("ledger {0} is locked by another writer")]
    LedgerLocked(PathBuf),

    #[error("no observations supplied")]
    NoObservations,
    #[error("length {0} must be even and positive")]
    InvalidLength(i64),
    #[error("trial count must be positive")]
    InvalidTrialCount,
    #[error("invalid search bounds: {0}")]
    InvalidBounds(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
