//! Record fields that key an encryption, and the derivation of K1 and K2.
//!
//! K1 comes from the record timestamp, `(dd * mm + SS) * (HH + MM + yy)`.
//! K2 is the sum of the char-value codes of the cashier id.

use std::fmt;
use std::str::FromStr;

use crate::codec::CharValueScheme;
use crate::error::{Error, Result};

/// Largest K1 any valid two-digit-year timestamp can produce.
pub const MAX_K1: u64 = 431 * 181;

#[derive(Debug, Clone, Copy)]
pub struct RecordDate {
    pub day: u8,
    pub month: u8,
    pub year: u8,
    pub separator: char,
}

// The separator carries no meaning; two dates are the same day regardless.
impl PartialEq for RecordDate {
    fn eq(&self, other: &Self) -> bool {
        (self.day, self.month, self.year) == (other.day, other.month, other.year)
    }
}

impl Eq for RecordDate {}

impl std::hash::Hash for RecordDate {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        (self.day, self.month, self.year).hash(state);
    }
}

impl PartialOrd for RecordDate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RecordDate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.year, self.month, self.day).cmp(&(other.year, other.month, other.day))
    }
}

impl RecordDate {
    pub fn new(day: u8, month: u8, year: u8) -> Result<Self> {
        let d = RecordDate {
            day,
            month,
            year,
            separator: '/',
        };
        if !d.in_range() {
            return Err(Error::DateRange(d.to_string()));
        }
        Ok(d)
    }

    fn in_range(&self) -> bool {
        (1..=31).contains(&self.day) && (1..=12).contains(&self.month) && self.year <= 99
    }
}

impl fmt::Display for RecordDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = self.separator;
        write!(f, "{:02}{sep}{:02}{sep}{:02}", self.day, self.month, self.year)
    }
}

/// Splits `s` on `sep` into exactly three two-digit numeric elements.
fn two_digit_triple(s: &str, sep: char) -> Option<[u8; 3]> {
    let mut out = [0u8; 3];
    let mut parts = s.split(sep);
    for slot in out.iter_mut() {
        let part = parts.next()?;
        if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        *slot = part.parse().ok()?;
    }
    parts.next().is_none().then_some(out)
}

/// Parses `dd-mm-yy` or `dd/mm/yy`. Calendar validity (e.g. 31/02) is not checked.
pub fn parse_record_date(s: &str) -> Result<RecordDate> {
    let separator = match s.chars().nth(2) {
        Some(c @ ('-' | '/')) => c,
        _ => return Err(Error::DateFormat(s.to_owned())),
    };
    let [day, month, year] =
        two_digit_triple(s, separator).ok_or_else(|| Error::DateFormat(s.to_owned()))?;
    let date = RecordDate {
        day,
        month,
        year,
        separator,
    };
    if !date.in_range() {
        return Err(Error::DateRange(s.to_owned()));
    }
    Ok(date)
}

impl FromStr for RecordDate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_record_date(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordTime {
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
}

impl RecordTime {
    pub fn new(hour: u8, minute: u8, second: u8) -> Result<Self> {
        let t = RecordTime {
            hour,
            minute,
            second,
        };
        if !t.in_range() {
            return Err(Error::TimeRange(t.to_string()));
        }
        Ok(t)
    }

    fn in_range(&self) -> bool {
        self.hour <= 23 && self.minute <= 59 && self.second <= 59
    }
}

impl fmt::Display for RecordTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}:{:02}", self.hour, self.minute, self.second)
    }
}

/// Parses `HH:MM:SS`. Minute 00 is accepted; see [`compute_k1`].
pub fn parse_record_time(s: &str) -> Result<RecordTime> {
    let [hour, minute, second] =
        two_digit_triple(s, ':').ok_or_else(|| Error::TimeFormat(s.to_owned()))?;
    let t = RecordTime {
        hour,
        minute,
        second,
    };
    if !t.in_range() {
        return Err(Error::TimeRange(s.to_owned()));
    }
    Ok(t)
}

impl FromStr for RecordTime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_record_time(s)
    }
}

/// Length limits for cashier ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CashierIdPolicy {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for CashierIdPolicy {
    fn default() -> Self {
        CashierIdPolicy {
            min_len: 3,
            max_len: 17,
        }
    }
}

/// Uppercase alphanumeric operator id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CashierId(String);

impl CashierId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for CashierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn validate_cashier_id(s: &str) -> Result<CashierId> {
    validate_cashier_id_with(s, CashierIdPolicy::default())
}

pub fn validate_cashier_id_with(s: &str, policy: CashierIdPolicy) -> Result<CashierId> {
    if !s
        .chars()
        .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
    {
        return Err(Error::CashierIdChar(s.to_owned()));
    }
    if !(policy.min_len..=policy.max_len).contains(&s.len()) {
        return Err(Error::CashierIdLength {
            id: s.to_owned(),
            min: policy.min_len,
            max: policy.max_len,
        });
    }
    Ok(CashierId(s.to_owned()))
}

impl FromStr for CashierId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        validate_cashier_id(s)
    }
}

/// A monetary amount `Ip.Fp` with exactly two fraction digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Amount {
    integer: u64,
    fraction: u8,
}

impl Amount {
    pub fn new(integer: u64, fraction: u8) -> Result<Self> {
        if fraction > 99 {
            return Err(Error::AmountFormat(format!("{integer}.{fraction}")));
        }
        Ok(Amount { integer, fraction })
    }

    /// Integer part `Ip`.
    pub fn integer_part(&self) -> u64 {
        self.integer
    }

    /// Fraction part `Fp` as a number in `0..=99`.
    pub fn fraction_part(&self) -> u8 {
        self.fraction
    }

    /// Fraction part as its two-digit text.
    pub fn fraction_digits(&self) -> String {
        format!("{:02}", self.fraction)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.integer, self.fraction)
    }
}

/// Parses `#+.##`: one or more integer digits, a dot, exactly two digits.
pub fn parse_amount(s: &str) -> Result<Amount> {
    let err = || Error::AmountFormat(s.to_owned());
    let (int, frac) = s.split_once('.').ok_or_else(err)?;
    let all_digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int) || frac.len() != 2 || !all_digits(frac) {
        return Err(err());
    }
    let integer = int.parse().map_err(|_| err())?;
    let fraction = frac.parse().map_err(|_| err())?;
    Ok(Amount { integer, fraction })
}

impl FromStr for Amount {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_amount(s)
    }
}

/// The two record-derived keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeyPair {
    pub k1: u64,
    pub k2: u64,
}

impl KeyPair {
    /// Derives both keys from a record's timestamp and cashier id.
    pub fn derive(
        date: &RecordDate,
        time: &RecordTime,
        cashier: &CashierId,
        scheme: &CharValueScheme,
    ) -> Result<Self> {
        Ok(KeyPair {
            k1: compute_k1(date, time)?,
            k2: compute_k2(cashier, scheme),
        })
    }
}

/// Raw `(dd * mm + SS) * (HH + MM + yy)`, possibly zero.
pub fn k1_formula(date: &RecordDate, time: &RecordTime) -> u64 {
    let left = date.day as u64 * date.month as u64 + time.second as u64;
    let right = time.hour as u64 + time.minute as u64 + date.year as u64;
    left * right
}

/// K1 for a record; fails when the timestamp yields zero.
pub fn compute_k1(date: &RecordDate, time: &RecordTime) -> Result<u64> {
    match k1_formula(date, time) {
        0 => Err(Error::DegenerateTimestamp),
        k1 => Ok(k1),
    }
}

pub fn compute_k2(cashier: &CashierId, scheme: &CharValueScheme) -> u64 {
    cashier
        .as_str()
        .chars()
        .map(|c| {
            scheme
                .value(c)
                .expect("cashier ids are validated against the scheme alphabet") as u64
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::char_value_scheme;

    fn date(s: &str) -> RecordDate {
        parse_record_date(s).unwrap()
    }

    fn time(s: &str) -> RecordTime {
        parse_record_time(s).unwrap()
    }

    #[test]
    fn parses_dates() {
        let d = date("21/05/12");
        assert_eq!((d.day, d.month, d.year), (21, 5, 12));
        let d = date("31-12-99");
        assert_eq!((d.day, d.month, d.year, d.separator), (31, 12, 99, '-'));
        assert_eq!(date("21-05-12"), date("21/05/12"));
        assert_eq!(date("21-05-12").to_string(), "21-05-12");
    }

    #[test]
    fn date_errors() {
        assert!(matches!(parse_record_date("32/01/12"), Err(Error::DateRange(_))));
        assert!(matches!(parse_record_date("00/01/12"), Err(Error::DateRange(_))));
        assert!(matches!(parse_record_date("01/13/12"), Err(Error::DateRange(_))));
        for bad in ["1/5/12", "21/05-12", "21.05.12", "21/05/2012", "", "aa/bb/cc", "21/05/12/"] {
            assert!(matches!(parse_record_date(bad), Err(Error::DateFormat(_))), "{bad}");
        }
        // no calendar validation
        assert!(parse_record_date("31/02/12").is_ok());
    }

    #[test]
    fn parses_times() {
        assert_eq!(time("15:50:08"), RecordTime::new(15, 50, 8).unwrap());
        assert_eq!(time("23:59:59"), RecordTime::new(23, 59, 59).unwrap());
        assert_eq!(time("00:00:00").to_string(), "00:00:00");
        assert!(matches!(parse_record_time("24:00:00"), Err(Error::TimeRange(_))));
        assert!(matches!(parse_record_time("12:60:00"), Err(Error::TimeRange(_))));
        assert!(matches!(parse_record_time("12:00:60"), Err(Error::TimeRange(_))));
        assert!(matches!(parse_record_time("1:00:00"), Err(Error::TimeFormat(_))));
        assert!(matches!(parse_record_time("12-00-00"), Err(Error::TimeFormat(_))));
    }

    #[test]
    fn cashier_ids() {
        assert_eq!(validate_cashier_id("CE840716").unwrap().as_str(), "CE840716");
        assert!(matches!(validate_cashier_id("ce840716"), Err(Error::CashierIdChar(_))));
        assert!(matches!(validate_cashier_id("CE-84"), Err(Error::CashierIdChar(_))));
        assert!(matches!(validate_cashier_id("AB"), Err(Error::CashierIdLength { .. })));
        assert!(validate_cashier_id("ABC").is_ok());
        assert!(validate_cashier_id(&"A".repeat(17)).is_ok());
        assert!(validate_cashier_id(&"A".repeat(18)).is_err());
        let loose = CashierIdPolicy {
            min_len: 1,
            max_len: 40,
        };
        assert!(validate_cashier_id_with("AB", loose).is_ok());
    }

    #[test]
    fn amounts() {
        let a = parse_amount("50.00").unwrap();
        assert_eq!((a.integer_part(), a.fraction_digits().as_str()), (50, "00"));
        let a = parse_amount("0.00").unwrap();
        assert_eq!((a.integer_part(), a.fraction_part()), (0, 0));
        assert_eq!(parse_amount("007.05").unwrap().to_string(), "7.05");
        for bad in ["50.0", "50", ".50", "50.000", "5a.00", "-1.00", "50,00", "1.2.3", ""] {
            assert!(matches!(parse_amount(bad), Err(Error::AmountFormat(_))), "{bad}");
        }
        assert!(parse_amount("99999999999999999999999.00").is_err());
    }

    #[test]
    fn k1_examples() {
        assert_eq!(compute_k1(&date("21/05/12"), &time("15:50:08")).unwrap(), 8701);
        assert_eq!(compute_k1(&date("31/12/99"), &time("23:59:59")).unwrap(), 78011);
        assert_eq!(MAX_K1, 78011);
        assert!(matches!(
            compute_k1(&date("01/01/00"), &time("00:00:00")),
            Err(Error::DegenerateTimestamp)
        ));
        assert_eq!(compute_k1(&date("01/01/00"), &time("00:01:00")).unwrap(), 1);
    }

    #[test]
    fn k1_zero_only_when_right_factor_zero() {
        // left factor dd*mm+SS is at least 1, so zero requires HH+MM+yy = 0
        for yy in [0u8, 1] {
            for hh in [0u8, 1] {
                for mm in [0u8, 1] {
                    let k = k1_formula(
                        &RecordDate::new(1, 1, yy).unwrap(),
                        &RecordTime::new(hh, mm, 0).unwrap(),
                    );
                    assert_eq!(k == 0, yy + hh + mm == 0);
                }
            }
        }
    }

    #[test]
    fn k1_monotone_in_each_element() {
        let base_d = RecordDate::new(3, 4, 5).unwrap();
        let base_t = RecordTime::new(6, 7, 8).unwrap();
        let base = k1_formula(&base_d, &base_t);
        assert!(k1_formula(&base_d, &RecordTime::new(6, 7, 9).unwrap()) > base);
        assert!(k1_formula(&base_d, &RecordTime::new(7, 7, 8).unwrap()) > base);
        assert!(k1_formula(&base_d, &RecordTime::new(6, 8, 8).unwrap()) > base);
        assert!(k1_formula(&RecordDate::new(3, 4, 6).unwrap(), &base_t) > base);
    }

    #[test]
    fn k2_examples() {
        let s1 = char_value_scheme(1).unwrap();
        let s2 = char_value_scheme(2).unwrap();
        assert_eq!(compute_k2(&validate_cashier_id("CE840716").unwrap(), s1), 356);
        assert_eq!(compute_k2(&validate_cashier_id("AAA").unwrap(), s1), 63);
        assert_eq!(compute_k2(&validate_cashier_id("AAA").unwrap(), s2), 93);
    }

    proptest::proptest! {
        #[test]
        fn k2_order_independent_and_steps_by_scheme(
            chars in proptest::collection::vec(proptest::sample::select(
                crate::codec::CASHIER_ALPHABET.chars().collect::<Vec<_>>()), 3..=17),
            z in 1u32..15,
        ) {
            let id: String = chars.iter().collect();
            let rev: String = chars.iter().rev().collect();
            let a = validate_cashier_id(&id).unwrap();
            let b = validate_cashier_id(&rev).unwrap();
            let lo = char_value_scheme(z).unwrap();
            let hi = char_value_scheme(z + 1).unwrap();
            proptest::prop_assert_eq!(compute_k2(&a, lo), compute_k2(&b, lo));
            proptest::prop_assert_eq!(compute_k2(&a, hi), compute_k2(&a, lo) + 10 * id.len() as u64);
        }
    }
}
