//! Measurements of how strong the scheme really is.
//!
//! The adversary model: the algorithm and all thirty coding schemes are
//! known, and so are the sibling fields (date, time, cashier id) sitting in
//! the same record. Only the six rotating parameters are secret.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cipher::{decrypt_amount, encrypt_amount, Ciphertext, CryptoParams, MAX_BASE, MAX_EXPONENT};
use crate::codec::{char_value_scheme, pair_symbol_scheme, CASHIER_ALPHABET, SCHEME_COUNT};
use crate::error::{Error, Result};
use crate::keys::{
    compute_k1, compute_k2, parse_amount, parse_record_date, parse_record_time,
    validate_cashier_id, Amount, CashierId, KeyPair, RecordDate, RecordTime,
};
use crate::rotation::next_params;

/// A known plaintext with its ciphertext and the public sibling fields.
#[derive(Debug, Clone)]
pub struct Observation {
    pub amount: Amount,
    pub ciphertext: Ciphertext,
    pub date: RecordDate,
    pub time: RecordTime,
    pub cashier: CashierId,
}

/// On-disk form of an [`Observation`], one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub amount: String,
    pub ciphertext: String,
    pub date: String,
    pub time: String,
    pub cashierid: String,
}

impl TryFrom<ObservationRecord> for Observation {
    type Error = Error;
    fn try_from(r: ObservationRecord) -> Result<Self> {
        Ok(Observation {
            amount: parse_amount(&r.amount)?,
            ciphertext: Ciphertext::new(r.ciphertext),
            date: parse_record_date(&r.date)?,
            time: parse_record_time(&r.time)?,
            cashier: validate_cashier_id(&r.cashierid)?,
        })
    }
}

impl From<&Observation> for ObservationRecord {
    fn from(o: &Observation) -> Self {
        ObservationRecord {
            amount: o.amount.to_string(),
            ciphertext: o.ciphertext.as_str().to_owned(),
            date: o.date.to_string(),
            time: o.time.to_string(),
            cashierid: o.cashier.as_str().to_owned(),
        }
    }
}

/// Inclusive search ranges for each parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBounds {
    pub p: RangeInclusive<u32>,
    pub q: RangeInclusive<u32>,
    pub m: RangeInclusive<u32>,
    pub n: RangeInclusive<u32>,
    pub z: RangeInclusive<u32>,
    pub w: RangeInclusive<u32>,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self::full()
    }
}

impl ParamBounds {
    /// The whole parameter space: 5 * 5 * 50 * 50 * 15 * 15 tuples.
    pub fn full() -> Self {
        ParamBounds {
            p: 0..=MAX_EXPONENT,
            q: 0..=MAX_EXPONENT,
            m: 1..=MAX_BASE,
            n: 1..=MAX_BASE,
            z: 1..=SCHEME_COUNT as u32,
            w: 1..=SCHEME_COUNT as u32,
        }
    }

    fn ranges(&self) -> [(&'static str, &RangeInclusive<u32>, RangeInclusive<u32>); 6] {
        let full = Self::full();
        [
            ("p", &self.p, full.p),
            ("q", &self.q, full.q),
            ("m", &self.m, full.m),
            ("n", &self.n, full.n),
            ("z", &self.z, full.z),
            ("w", &self.w, full.w),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r, full) in self.ranges() {
            if r.is_empty() || r.start() < full.start() || r.end() > full.end() {
                return Err(Error::InvalidBounds(format!(
                    "{name}={}..{} must be a nonempty subrange of {}..{}",
                    r.start(),
                    r.end(),
                    full.start(),
                    full.end()
                )));
            }
        }
        Ok(())
    }

    /// Number of raw tuples in the box.
    pub fn size(&self) -> u64 {
        self.ranges()
            .iter()
            .map(|(_, r, _)| (*r.end() as u64 + 1).saturating_sub(*r.start() as u64))
            .product()
    }
}

impl fmt::Display for ParamBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .ranges()
            .iter()
            .map(|(name, r, _)| format!("{name}={}..{}", r.start(), r.end()))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `p=0..2,m=1..10,...`; omitted parameters keep their full range and
/// a single value `z=3` means `z=3..3`.
impl FromStr for ParamBounds {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut b = ParamBounds::full();
        let bad = || Error::InvalidBounds(s.to_owned());
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, range) = part.split_once('=').ok_or_else(bad)?;
            let (lo, hi) = range.split_once("..").unwrap_or((range, range));
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            let slot = match name.trim() {
                "p" => &mut b.p,
                "q" => &mut b.q,
                "m" => &mut b.m,
                "n" => &mut b.n,
                "z" => &mut b.z,
                "w" => &mut b.w,
                _ => return Err(bad()),
            };
            *slot = lo..=hi;
        }
        b.validate()?;
        Ok(b)
    }
}

/// Every tuple consistent with the observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    /// Sorted, deduplicated.
    pub tuples: Vec<CryptoParams>,
    /// Raw tuples examined, valid or not.
    pub space_size: u64,
}

impl CandidateSet {
    pub fn contains(&self, params: &CryptoParams) -> bool {
        self.tuples.iter().any(|t| t.tuple() == params.tuple())
    }
}

/// Exhaustive known-plaintext search for the hidden parameter tuple.
///
/// A tuple is a candidate iff it is a valid parameter set and re-encrypting
/// every observation under it gives the observed ciphertext.
pub fn recover_params(obs: &[Observation], bounds: &ParamBounds) -> Result<CandidateSet> {
    if obs.is_empty() {
        return Err(Error::NoObservations);
    }
    bounds.validate()?;

    // K1 is parameter-free; K2 depends only on z.
    let k1s = obs
        .iter()
        .map(|o| compute_k1(&o.date, &o.time))
        .collect::<Result<Vec<_>>>()?;
    let k2s: Vec<Vec<u64>> = bounds
        .z
        .clone()
        .map(|z| {
            let scheme = char_value_scheme(z).expect("bounds validated");
            obs.iter().map(|o| compute_k2(&o.cashier, scheme)).collect()
        })
        .collect();
    // The first symbol depends only on the fraction and w, which prunes w up front.
    let ws: Vec<u32> = bounds
        .w
        .clone()
        .filter(|&w| {
            let scheme = pair_symbol_scheme(w).expect("bounds validated");
            obs.iter()
                .all(|o| o.ciphertext.symbols().next() == Some(scheme.symbol(o.amount.fraction_part())))
        })
        .collect();

    let outer: Vec<(u32, u32, u32, u32)> = bounds
        .p
        .clone()
        .flat_map(|p| bounds.q.clone().map(move |q| (p, q)))
        .flat_map(|(p, q)| bounds.m.clone().map(move |m| (p, q, m)))
        .flat_map(|(p, q, m)| bounds.n.clone().map(move |n| (p, q, m, n)))
        .collect();

    let found: BTreeSet<CryptoParams> = outer
        .par_iter()
        .flat_map_iter(|&(p, q, m, n)| {
            let mut hits = Vec::new();
            for (zi, z) in bounds.z.clone().enumerate() {
                for &w in &ws {
                    let Ok(params) = CryptoParams::new(p, q, m, n, z, w) else {
                        continue;
                    };
                    let consistent = obs.iter().enumerate().all(|(i, o)| {
                        let keys = KeyPair {
                            k1: k1s[i],
                            k2: k2s[zi][i],
                        };
                        matches!(encrypt_amount(&o.amount, &keys, &params), Ok(ct) if ct == o.ciphertext)
                    });
                    if consistent {
                        hits.push(params);
                    }
                }
            }
            hits
        })
        .collect();

    Ok(CandidateSet {
        tuples: found.into_iter().collect(),
        space_size: bounds.size(),
    })
}

/// Counts of digit strings of length `n` and of pair-symbol strings of
/// length `n / 2`: `10^n` and `100^(n/2)`.
pub fn grouping_space(n: i64) -> Result<(BigUint, BigUint)> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidLength(n));
    }
    let ungrouped = BigUint::from(10u32).pow(n as u32);
    let grouped = BigUint::from(100u32).pow((n / 2) as u32);
    Ok((ungrouped, grouped))
}

/// How a single tampered ciphertext fared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamperOutcome {
    Detected,
    SilentSameAmount,
    SilentWrongAmount,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TamperCounts {
    pub trials: u64,
    pub detected: u64,
    pub silent_same: u64,
    pub silent_wrong: u64,
}

impl TamperCounts {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.detected as f64 / self.trials as f64
        }
    }

    fn record(&mut self, outcome: TamperOutcome) {
        self.trials += 1;
        match outcome {
            TamperOutcome::Detected => self.detected += 1,
            TamperOutcome::SilentSameAmount => self.silent_same += 1,
            TamperOutcome::SilentWrongAmount => self.silent_wrong += 1,
        }
    }
}

/// Shape of the random records used by tamper trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialConfig {
    /// Integer parts are drawn uniformly from `0..=max_integer`.
    pub max_integer: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            max_integer: 1_000_000,
        }
    }
}

/// A random valid record, its parameters and keys.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub date: RecordDate,
    pub time: RecordTime,
    pub cashier: CashierId,
    pub amount: Amount,
    pub params: CryptoParams,
    pub keys: KeyPair,
}

/// Draws a record with a non-degenerate timestamp and generator-emitted parameters.
pub fn random_record<R: Rng + ?Sized>(rng: &mut R, config: &TrialConfig) -> Result<TrialRecord> {
    let (date, time, k1) = loop {
        let date = RecordDate::new(
            rng.random_range(1..=31),
            rng.random_range(1..=12),
            rng.random_range(0..=99),
        )?;
        let time = RecordTime::new(
            rng.random_range(0..=23),
            rng.random_range(0..=59),
            rng.random_range(0..=59),
        )?;
        if let Ok(k1) = compute_k1(&date, &time) {
            break (date, time, k1);
        }
    };
    let alphabet: Vec<char> = CASHIER_ALPHABET.chars().collect();
    let len = rng.random_range(3..=17);
    let id: String = (0..len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect();
    let cashier = validate_cashier_id(&id)?;
    let amount = Amount::new(
        rng.random_range(0..=config.max_integer),
        rng.random_range(0..=99),
    )?;
    let params = next_params(&CryptoParams::demo(), rng)?;
    let keys = KeyPair {
        k1,
        k2: compute_k2(&cashier, char_value_scheme(params.z)?),
    };
    Ok(TrialRecord {
        date,
        time,
        cashier,
        amount,
        params,
        keys,
    })
}

/// Replaces the symbol at `position` with a uniformly chosen different
/// symbol of the same scheme.
pub fn substitute_symbol<R: Rng + ?Sized>(
    ct: &Ciphertext,
    position: usize,
    w: u32,
    rng: &mut R,
) -> Result<Ciphertext> {
    let scheme = pair_symbol_scheme(w)?;
    let mut symbols: Vec<char> = ct.symbols().collect();
    let old = symbols[position];
    let old_pair = scheme.pair(old).ok_or(Error::UnknownSymbol(old))?;
    let mut pick: u8 = rng.random_range(0..99);
    if pick >= old_pair {
        pick += 1;
    }
    symbols[position] = scheme.symbol(pick);
    Ok(Ciphertext::new(symbols.into_iter().collect::<String>()))
}

pub fn classify_tampered(tampered: &Ciphertext, record: &TrialRecord) -> TamperOutcome {
    match decrypt_amount(tampered, &record.keys, &record.params) {
        Ok(a) if a == record.amount => TamperOutcome::SilentSameAmount,
        Ok(_) => TamperOutcome::SilentWrongAmount,
        Err(_) => TamperOutcome::Detected,
    }
}

fn tamper_trials<R, F>(trials: u64, rng: &mut R, config: &TrialConfig, pick_position: F) -> Result<TamperCounts>
where
    R: Rng + ?Sized,
    F: Fn(&mut R, usize) -> usize,
{
    if trials == 0 {
        return Err(Error::InvalidTrialCount);
    }
    let mut counts = TamperCounts::default();
    for _ in 0..trials {
        let record = random_record(rng, config)?;
        let ct = encrypt_amount(&record.amount, &record.keys, &record.params)?;
        let position = pick_position(rng, ct.symbol_count());
        let tampered = substitute_symbol(&ct, position, record.params.w, rng)?;
        counts.record(classify_tampered(&tampered, &record));
    }
    Ok(counts)
}

/// Single-symbol substitutions in the integer region: how often the
/// divisibility check catches them.
pub fn tamper_detection_rate<R: Rng + ?Sized>(
    trials: u64,
    rng: &mut R,
    config: &TrialConfig,
) -> Result<TamperCounts> {
    tamper_trials(trials, rng, config, |rng, len| rng.random_range(1..len))
}

/// Substitutions of the fraction symbol, which the integrity check never sees.
pub fn fraction_tamper_outcomes<R: Rng + ?Sized>(
    trials: u64,
    rng: &mut R,
    config: &TrialConfig,
) -> Result<TamperCounts> {
    tamper_trials(trials, rng, config, |_, _| 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn worked_example() -> Observation {
        Observation {
            amount: parse_amount("50.00").unwrap(),
            ciphertext: Ciphertext::new("+Rp("),
            date: parse_record_date("21/05/12").unwrap(),
            time: parse_record_time("15:50:08").unwrap(),
            cashier: validate_cashier_id("CE840716").unwrap(),
        }
    }

    #[test]
    fn recovers_demo_tuple() {
        let bounds: ParamBounds = "p=0..0,q=0..0,m=1..3,n=1..3,z=1..2,w=1..2".parse().unwrap();
        assert_eq!(bounds.size(), 36);
        let set = recover_params(&[worked_example()], &bounds).unwrap();
        assert!(set.contains(&CryptoParams::demo()));
        assert_eq!(set.space_size, 36);
    }

    #[test]
    fn fabricated_ciphertext_has_no_candidates() {
        let mut obs = worked_example();
        obs.ciphertext = Ciphertext::new("+Ap(");
        let bounds: ParamBounds = "p=0..2,q=0..2,m=1..6,n=1..6".parse().unwrap();
        let set = recover_params(&[obs], &bounds).unwrap();
        assert!(set.tuples.is_empty());
    }

    #[test]
    fn recover_errors() {
        assert!(matches!(recover_params(&[], &ParamBounds::full()), Err(Error::NoObservations)));
        let bad = ParamBounds {
            m: 0..=3,
            ..ParamBounds::full()
        };
        assert!(matches!(recover_params(&[worked_example()], &bad), Err(Error::InvalidBounds(_))));
    }

    #[test]
    fn bounds_parsing() {
        assert_eq!(ParamBounds::full().size(), 14_062_500);
        assert_eq!("".parse::<ParamBounds>().unwrap(), ParamBounds::full());
        let b: ParamBounds = "p=1,w=2..=4".parse().unwrap();
        assert_eq!(b.p, 1..=1);
        assert_eq!(b.w, 2..=4);
        assert_eq!(b.to_string().parse::<ParamBounds>().unwrap(), b);
        assert!("x=1..2".parse::<ParamBounds>().is_err());
        assert!("p=3..1".parse::<ParamBounds>().is_err());
        assert!("p=0..9".parse::<ParamBounds>().is_err());
    }

    #[test]
    fn grouping_counts() {
        let (a, b) = grouping_space(2).unwrap();
        assert_eq!((a.to_string(), b.to_string()), ("100".into(), "100".into()));
        let (a, b) = grouping_space(6).unwrap();
        assert_eq!(a, BigUint::from(1_000_000u32));
        assert_eq!(a, b);
        assert!(matches!(grouping_space(3), Err(Error::InvalidLength(3))));
        assert!(matches!(grouping_space(0), Err(Error::InvalidLength(0))));
        assert!(matches!(grouping_space(-2), Err(Error::InvalidLength(-2))));
        for n in (2..=200).step_by(2) {
            let (a, b) = grouping_space(n).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_string().len() as i64, n + 1);
        }
    }

    #[test]
    fn worked_example_substitution_detected() {
        let obs = worked_example();
        let record = TrialRecord {
            date: obs.date,
            time: obs.time,
            cashier: obs.cashier.clone(),
            amount: obs.amount,
            params: CryptoParams::demo(),
            keys: KeyPair { k1: 8701, k2: 356 },
        };
        assert_eq!(classify_tampered(&Ciphertext::new("+Ap("), &record), TamperOutcome::Detected);
    }

    #[test]
    fn fraction_substitutions_are_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let counts = fraction_tamper_outcomes(500, &mut rng, &TrialConfig::default()).unwrap();
        assert_eq!(counts.silent_wrong, 500);
        assert_eq!(counts.rate(), 0.0);
    }

    #[test]
    fn tamper_counts_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = tamper_detection_rate(300, &mut rng, &TrialConfig::default()).unwrap();
        assert_eq!(c.trials, 300);
        assert_eq!(c.detected + c.silent_same + c.silent_wrong, 300);
        // a substituted integer pair always changes the decoded number
        assert_eq!(c.silent_same, 0);
        assert!(matches!(
            tamper_detection_rate(0, &mut rng, &TrialConfig::default()),
            Err(Error::InvalidTrialCount)
        ));
    }

    #[test]
    fn substitution_changes_exactly_one_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ct = Ciphertext::new("+Rp(");
        for _ in 0..200 {
            let t = substitute_symbol(&ct, 2, 1, &mut rng).unwrap();
            let diff = ct.symbols().zip(t.symbols()).filter(|(a, b)| a != b).count();
            assert_eq!(diff, 1);
            assert_eq!(t.symbol_count(), 4);
        }
    }

    #[test]
    fn observation_record_round_trip() {
        let o = worked_example();
        let line = serde_json::to_string(&ObservationRecord::from(&o)).unwrap();
        let back: Observation = serde_json::from_str::<ObservationRecord>(&line).unwrap().try_into().unwrap();
        assert_eq!(back.ciphertext, o.ciphertext);
        assert_eq!(back.amount, o.amount);
    }
}
