//! Amount encryption and decryption.
//!
//! Encryption of `Ip.Fp` under keys `(K1, K2)` and parameters
//! `(p, q, m, n, z, w)`:
//!
//! 1. `c1 = n^p * K1 * Ip ± m^q * K1`
//! 2. `c2 = c1 + K2`
//! 3. the decimal form of `c2`, with a leading `0` when its length is odd
//! 4. that digit string encoded pairwise with pair scheme `w`
//!
//! The fraction `Fp` is encoded as one symbol with the same scheme and placed
//! first. Decryption reverses the steps and requires
//! `c2 - K2 ∓ m^q * K1` to be a non-negative multiple of `n^p * K1`; anything
//! else means the stored value was altered.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{self, pair_symbol_scheme};
use crate::error::{Error, Result};
use crate::keys::{Amount, KeyPair};

/// Default bound on intermediate values: the largest signed 64-bit integer.
pub const DEFAULT_WIDTH_BOUND: u64 = i64::MAX as u64;

pub const MAX_EXPONENT: u32 = 4;
pub const MAX_BASE: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

/// The rotating parameter tuple `p, q, m, n, z, w`, plus the sign of the
/// `m^q * K1` term and the width bound on intermediates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CryptoParams {
    pub p: u32,
    pub q: u32,
    pub m: u32,
    pub n: u32,
    /// Char-value scheme used for K2.
    pub z: u32,
    /// Pair-symbol scheme used for both ciphertext parts.
    pub w: u32,
    pub sign: Sign,
    pub width_bound: u64,
}

impl CryptoParams {
    /// Validated constructor with `sign = +` and the default width bound.
    pub fn new(p: u32, q: u32, m: u32, n: u32, z: u32, w: u32) -> Result<Self> {
        let params = CryptoParams {
            p,
            q,
            m,
            n,
            z,
            w,
            sign: Sign::Plus,
            width_bound: DEFAULT_WIDTH_BOUND,
        };
        params.validate()?;
        Ok(params)
    }

    /// The `(0, 0, 1, 1, 1, 1)` tuple of the published worked example.
    pub fn demo() -> Self {
        Self::demo_with_schemes(1, 1)
    }

    pub fn demo_with_schemes(z: u32, w: u32) -> Self {
        CryptoParams {
            p: 0,
            q: 0,
            m: 1,
            n: 1,
            z,
            w,
            sign: Sign::Plus,
            width_bound: DEFAULT_WIDTH_BOUND,
        }
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    /// `p = q = 0, m = n = 1`, whatever the scheme ids.
    pub fn is_demo(&self) -> bool {
        self.p == 0 && self.q == 0 && self.m == 1 && self.n == 1
    }

    /// The six persisted values in settings order.
    pub fn tuple(&self) -> [u32; 6] {
        [self.p, self.q, self.m, self.n, self.z, self.w]
    }

    /// `n^p`.
    pub fn n_coefficient(&self) -> u64 {
        coefficient(self.n, self.p)
    }

    /// `m^q`.
    pub fn m_coefficient(&self) -> u64 {
        coefficient(self.m, self.q)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.p > MAX_EXPONENT || self.q > MAX_EXPONENT {
            return bad(format!("exponents p={} q={} must be in 0..=4", self.p, self.q));
        }
        if !(1..=MAX_BASE).contains(&self.m) || !(1..=MAX_BASE).contains(&self.n) {
            return bad(format!("bases m={} n={} must be in 1..=50", self.m, self.n));
        }
        for (name, id) in [("z", self.z), ("w", self.w)] {
            if !(1..=codec::SCHEME_COUNT as u32).contains(&id) {
                return bad(format!("scheme id {name}={id} must be in 1..=15"));
            }
        }
        if self.width_bound < DEFAULT_WIDTH_BOUND {
            return bad(format!("width bound {} is below 2^63-1", self.width_bound));
        }
        if self.is_demo() {
            return Ok(());
        }
        if self.p == 0 && self.q == 0 {
            return bad("p and q must not both be 0".into());
        }
        if self.m == self.n {
            return bad(format!("m and n must differ (both {})", self.m));
        }
        if self.n_coefficient() == 1 && self.m_coefficient() == 1 {
            return bad("n^p and m^q must not both be 1".into());
        }
        Ok(())
    }
}

impl fmt::Display for CryptoParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [p, q, m, n, z, w] = self.tuple();
        write!(f, "{p},{q},{m},{n},{z},{w}")
    }
}

/// Encrypted amount: the fraction symbol followed by the integer-part symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ciphertext(String);

impl Ciphertext {
    pub fn new(symbols: impl Into<String>) -> Self {
        Ciphertext(symbols.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Length in symbols, not bytes.
    pub fn symbol_count(&self) -> usize {
        self.0.chars().count()
    }

    pub fn symbols(&self) -> std::str::Chars<'_> {
        self.0.chars()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Ciphertext {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(Ciphertext(s.to_owned()))
    }
}

/// `base^exponent` for `base` in 1..=50 and `exponent` in 0..=4; at most 50^4.
pub fn coefficient(base: u32, exponent: u32) -> u64 {
    (base as u64).pow(exponent)
}

/// Prepends a `0` to an odd-length digit string.
pub fn pad_even(digits: &str) -> Result<String> {
    if digits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(c) = digits.chars().find(|c| !c.is_ascii_digit()) {
        return Err(Error::InvalidDigit(c));
    }
    if digits.len() % 2 == 1 {
        Ok(format!("0{digits}"))
    } else {
        Ok(digits.to_owned())
    }
}

/// Intermediate values of one encryption, exposed for inspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptionTrace {
    pub cipher1: u64,
    pub cipher2: u64,
    pub padded: String,
    pub integer_symbols: String,
    pub fraction_symbol: char,
    pub ciphertext: Ciphertext,
}

/// Runs the encryption steps and returns every intermediate.
pub fn encrypt_trace(amount: &Amount, keys: &KeyPair, params: &CryptoParams) -> Result<EncryptionTrace> {
    params.validate()?;
    if keys.k1 == 0 {
        return Err(Error::DegenerateTimestamp);
    }
    let scheme = pair_symbol_scheme(params.w)?;
    let k1 = keys.k1 as i128;
    let bound = params.width_bound as i128;

    let scaled = (params.n_coefficient() as i128)
        .checked_mul(k1)
        .and_then(|v| v.checked_mul(amount.integer_part() as i128))
        .ok_or(Error::AmountTooLarge)?;
    let offset = params.m_coefficient() as i128 * k1;
    let c1 = match params.sign {
        Sign::Plus => scaled.checked_add(offset),
        Sign::Minus => scaled.checked_sub(offset),
    }
    .ok_or(Error::AmountTooLarge)?;
    if c1 <= 0 {
        return Err(Error::NegativeIntermediate);
    }
    if c1 > bound {
        return Err(Error::AmountTooLarge);
    }
    let c2 = c1 + keys.k2 as i128;
    if c2 > bound {
        return Err(Error::AmountTooLarge);
    }

    let padded = pad_even(&c2.to_string())?;
    let integer_symbols = codec::encode_pairs(scheme, &padded)?;
    let fraction_symbol = scheme.symbol(amount.fraction_part());
    let mut ct = String::with_capacity(integer_symbols.len() + 4);
    ct.push(fraction_symbol);
    ct.push_str(&integer_symbols);
    Ok(EncryptionTrace {
        cipher1: c1 as u64,
        cipher2: c2 as u64,
        padded,
        integer_symbols,
        fraction_symbol,
        ciphertext: Ciphertext(ct),
    })
}

pub fn encrypt_amount(amount: &Amount, keys: &KeyPair, params: &CryptoParams) -> Result<Ciphertext> {
    encrypt_trace(amount, keys, params).map(|t| t.ciphertext)
}

/// Decrypts and integrity-checks a ciphertext.
pub fn decrypt_amount(ct: &Ciphertext, keys: &KeyPair, params: &CryptoParams) -> Result<Amount> {
    params.validate()?;
    if keys.k1 == 0 {
        return Err(Error::DegenerateTimestamp);
    }
    let scheme = pair_symbol_scheme(params.w)?;
    let mut symbols = ct.symbols();
    let (Some(head), rest) = (symbols.next(), symbols.as_str()) else {
        return Err(Error::CiphertextTooShort(0));
    };
    if rest.is_empty() {
        return Err(Error::CiphertextTooShort(1));
    }
    let fraction = scheme.pair(head).ok_or(Error::UnknownSymbol(head))?;
    let digits = codec::decode_pairs(scheme, rest)?;

    // A value wider than i128 cannot come from an in-bound c2.
    let x: i128 = digits.parse().map_err(|_| Error::TamperDetected)?;
    let y = x - keys.k2 as i128;
    if y <= 0 {
        return Err(Error::TamperDetected);
    }
    let k1 = keys.k1 as i128;
    let offset = params.m_coefficient() as i128 * k1;
    let d = match params.sign {
        Sign::Plus => y - offset,
        Sign::Minus => y + offset,
    };
    let divisor = params.n_coefficient() as i128 * k1;
    if d < 0 || d % divisor != 0 {
        return Err(Error::TamperDetected);
    }
    let integer = u64::try_from(d / divisor).map_err(|_| Error::TamperDetected)?;
    Amount::new(integer, fraction)
}
