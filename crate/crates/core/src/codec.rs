//! Coding schemes.
//!
//! Two families of fifteen hard-coded schemes each:
//!
//! * [`CharValueScheme`] maps every cashier-id character `A..Z`, `0..9` to a
//!   value of at least two digits. Summing those values gives K2.
//! * [`PairSymbolScheme`] is a bijection between the hundred digit pairs
//!   `"00"..="99"` and a hundred printable symbols. It turns the padded
//!   decimal form of the second encryption step into ciphertext symbols,
//!   and encodes the two fraction digits as a single symbol.
//!
//! Scheme 1 of each family is the published table. Scheme `k` of the
//! char-value family adds `10 * (k - 1)` to every value; scheme `k` of the
//! pair family rotates the canonical alphabet by `7 * (k - 1)` positions.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of schemes in each family.
pub const SCHEME_COUNT: u8 = 15;

/// Characters allowed in a cashier id, in table order.
pub const CASHIER_ALPHABET: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Canonical pair alphabet: index `v` is the symbol for the pair with value `v`.
///
/// Entry 75 (`¦`) and entry 91 (`|`) replace a duplicated `~` and a blank in
/// the printed table so that the map is a bijection. Entry 88 is a space.
#[rustfmt::skip]
pub const CANONICAL_PAIR_ALPHABET: [char; 100] = [
    '+', '-', '*', '?', '!', ',', '[', '(', ']', ')', // 00-09
    'A', 'a', 'B', 'b', 'C', 'c', 'D', 'd', 'E', 'e', // 10-19
    'F', 'f', 'G', 'g', 'H', 'h', 'I', 'i', 'J', 'j', // 20-29
    'K', 'k', 'L', 'l', 'M', 'm', 'N', 'n', 'O', 'o', // 30-39
    'P', 'p', 'Q', 'q', 'R', 'r', 'S', 's', 'T', 't', // 40-49
    'U', 'u', 'V', 'v', 'W', 'w', 'X', 'x', 'Y', 'y', // 50-59
    'Z', 'z', '.', '^', '<', '>', '%', '=', '$', '£', // 60-69
    '_', '#', '&', '~', '@', '¦', '`', '1', '2', '3', // 70-79
    '4', '5', '6', '7', '8', '9', '0', ';', ' ', '/', // 80-89
    '\\', '|', '{', '}', '“', '‘', '€', 'α', 'β', 'γ', // 90-99
];

/// Rotation step between consecutive pair schemes.
const PAIR_ROTATION_STEP: usize = 7;
/// Offset between consecutive char-value schemes.
const CHAR_VALUE_STEP: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    CharValue,
    PairSymbol,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::CharValue => f.write_str("char-value"),
            SchemeKind::PairSymbol => f.write_str("pair-symbol"),
        }
    }
}

fn check_id(kind: SchemeKind, id: u32) -> Result<u8> {
    if (1..=SCHEME_COUNT as u32).contains(&id) {
        Ok(id as u8)
    } else {
        Err(Error::SchemeIdOutOfRange { kind, id })
    }
}

/// Map from cashier-id characters to numeric values, used to derive K2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharValueScheme {
    id: u8,
    values: [u32; 36],
}

fn alphabet_index(c: char) -> Option<usize> {
    match c {
        'A'..='Z' => Some(c as usize - 'A' as usize),
        '0'..='9' => Some(26 + c as usize - '0' as usize),
        _ => None,
    }
}

/// Builds char-value scheme `id`.
///
/// Scheme 1 assigns `A → 21 … Z → 46, 0 → 47 … 9 → 56`.
pub fn build_char_value_scheme(id: u32) -> Result<CharValueScheme> {
    let id = check_id(SchemeKind::CharValue, id)?;
    let offset = CHAR_VALUE_STEP * (id as u32 - 1);
    let mut values = [0u32; 36];
    for (i, v) in values.iter_mut().enumerate() {
        *v = 21 + i as u32 + offset;
    }
    Ok(CharValueScheme { id, values })
}

impl CharValueScheme {
    pub fn id(&self) -> u8 {
        self.id
    }

    /// Value assigned to `c`, or `None` if `c` is outside `A..Z`, `0..9`.
    pub fn value(&self, c: char) -> Option<u32> {
        alphabet_index(c).map(|i| self.values[i])
    }

    /// `(character, value)` pairs in table order.
    pub fn entries(&self) -> impl Iterator<Item = (char, u32)> + '_ {
        CASHIER_ALPHABET.chars().zip(self.values.iter().copied())
    }

    /// Largest value in the scheme.
    pub fn max_value(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }
}

/// Bijection between two-digit pairs and symbols.
#[derive(Debug, Clone)]
pub struct PairSymbolScheme {
    id: u8,
    forward: [char; 100],
    reverse: HashMap<char, u8>,
}

impl PartialEq for PairSymbolScheme {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.forward == other.forward
    }
}

impl Eq for PairSymbolScheme {}

/// Builds pair-symbol scheme `id`: the pair with value `v` maps to
/// `CANONICAL_PAIR_ALPHABET[(v + 7 * (id - 1)) % 100]`.
pub fn build_pair_symbol_scheme(id: u32) -> Result<PairSymbolScheme> {
    let id = check_id(SchemeKind::PairSymbol, id)?;
    let shift = PAIR_ROTATION_STEP * (id as usize - 1);
    let mut forward = ['\0'; 100];
    for (v, slot) in forward.iter_mut().enumerate() {
        *slot = CANONICAL_PAIR_ALPHABET[(v + shift) % 100];
    }
    let reverse = forward
        .iter()
        .enumerate()
        .map(|(v, &c)| (c, v as u8))
        .collect::<HashMap<_, _>>();
    debug_assert_eq!(reverse.len(), 100);
    Ok(PairSymbolScheme {
        id,
        forward,
        reverse,
    })
}

impl PairSymbolScheme {
    pub fn id(&self) -> u8 {
        self.id
    }

    /// Symbol for the pair with numeric value `pair` (0..=99).
    pub fn symbol(&self, pair: u8) -> char {
        self.forward[pair as usize]
    }

    /// Numeric pair value for `symbol`, if it belongs to the scheme.
    pub fn pair(&self, symbol: char) -> Option<u8> {
        self.reverse.get(&symbol).copied()
    }

    /// `(pair, symbol)` entries ordered by pair value.
    pub fn entries(&self) -> impl Iterator<Item = (u8, char)> + '_ {
        self.forward.iter().enumerate().map(|(v, &c)| (v as u8, c))
    }
}

fn cached<T>(
    cell: &'static OnceLock<Vec<T>>,
    build: fn(u32) -> Result<T>,
    kind: SchemeKind,
    id: u32,
) -> Result<&'static T> {
    let all = cell.get_or_init(|| {
        (1..=SCHEME_COUNT as u32)
            .map(|i| build(i).expect("ids in range"))
            .collect()
    });
    let id = check_id(kind, id)?;
    Ok(&all[id as usize - 1])
}

/// Shared, lazily built instance of char-value scheme `id`.
pub fn char_value_scheme(id: u32) -> Result<&'static CharValueScheme> {
    static SCHEMES: OnceLock<Vec<CharValueScheme>> = OnceLock::new();
    cached(&SCHEMES, build_char_value_scheme, SchemeKind::CharValue, id)
}

/// Shared, lazily built instance of pair-symbol scheme `id`.
pub fn pair_symbol_scheme(id: u32) -> Result<&'static PairSymbolScheme> {
    static SCHEMES: OnceLock<Vec<PairSymbolScheme>> = OnceLock::new();
    cached(&SCHEMES, build_pair_symbol_scheme, SchemeKind::PairSymbol, id)
}

/// Encodes an even-length decimal string two digits at a time.
pub fn encode_pairs(scheme: &PairSymbolScheme, digits: &str) -> Result<String> {
    if digits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = digits.chars().find(|c| !c.is_ascii_digit()) {
        return Err(Error::InvalidDigit(bad));
    }
    // all ASCII from here, so byte length is the digit count
    if digits.len() % 2 != 0 {
        return Err(Error::OddLengthInput(digits.len()));
    }
    Ok(digits
        .as_bytes()
        .chunks_exact(2)
        .map(|pair| scheme.symbol((pair[0] - b'0') * 10 + (pair[1] - b'0')))
        .collect())
}

/// Inverse of [`encode_pairs`].
pub fn decode_pairs(scheme: &PairSymbolScheme, symbols: &str) -> Result<String> {
    if symbols.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = String::with_capacity(symbols.len() * 2);
    for c in symbols.chars() {
        let v = scheme.pair(c).ok_or(Error::UnknownSymbol(c))?;
        out.push(char::from(b'0' + v / 10));
        out.push(char::from(b'0' + v % 10));
    }
    Ok(out)
}
