//! Field-level encryption of payment amounts with keys taken from the
//! surrounding record.
//!
//! An amount is encrypted with two keys derived from its own row: K1 from
//! the date and time, K2 from the cashier id through a character-value
//! coding scheme. A rotating parameter tuple `p,q,m,n,z,w` scales the
//! arithmetic and selects coding schemes. Decryption checks divisibility,
//! so most edits to a stored ciphertext are detected.
//!
//! ```
//! use fieldcrypt::{encrypt_amount, decrypt_amount, CryptoParams, KeyPair, parse_amount};
//!
//! let keys = KeyPair { k1: 8701, k2: 356 };
//! let params = CryptoParams::demo();
//! let ct = encrypt_amount(&parse_amount("50.00")?, &keys, &params)?;
//! assert_eq!(ct.as_str(), "+Rp(");
//! assert_eq!(decrypt_amount(&ct, &keys, &params)?.to_string(), "50.00");
//! # Ok::<(), fieldcrypt::Error>(())
//! ```

pub mod cipher;
pub mod cli;
pub mod codec;
pub mod cryptanalysis;
pub mod error;
pub mod keys;
pub mod rotation;
pub mod store;

pub use cipher::{decrypt_amount, encrypt_amount, Ciphertext, CryptoParams, Sign};
pub use error::{Error, Result};
pub use keys::{parse_amount, Amount, CashierId, KeyPair, RecordDate, RecordTime};
pub use rotation::{next_params, parse_settings, serialize_settings};
pub use store::{Ledger, PaymentRecord};
