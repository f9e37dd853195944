//! Command-line front end. Every subcommand parses its flags, calls into the
//! library and formats the result; nothing else happens here.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cipher::{decrypt_amount, encrypt_amount, Ciphertext, CryptoParams};
use crate::codec::{char_value_scheme, pair_symbol_scheme};
use crate::cryptanalysis::{
    fraction_tamper_outcomes, grouping_space, recover_params, tamper_detection_rate, Observation,
    ObservationRecord, ParamBounds, TamperCounts, TrialConfig,
};
use crate::error::Error;
use crate::keys::{
    parse_amount, parse_record_date, parse_record_time, validate_cashier_id, KeyPair,
};
use crate::rotation::{next_params, parse_settings, rotate_ledger, RotationReport, SettingsFile};
use crate::store::{Ledger, LedgerLock, NewPayment, RecordKey, VerificationReport};

pub const LEDGER_ENV: &str = "FIELDCRYPT_LEDGER";
pub const SETTINGS_ENV: &str = "FIELDCRYPT_SETTINGS";
pub const DEFAULT_LEDGER: &str = "ledger.jsonl";
pub const DEFAULT_SETTINGS: &str = "settings.txt";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TAMPER: i32 = 3;
pub const EXIT_ROTATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "fieldcrypt", version, about = "Encrypt payment amounts with keys taken from their own records")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Ledger file.
    #[arg(long, global = true, env = LEDGER_ENV, default_value = DEFAULT_LEDGER)]
    ledger: PathBuf,
    /// Settings file holding p,q,m,n,z,w.
    #[arg(long, global = true, env = SETTINGS_ENV, default_value = DEFAULT_SETTINGS)]
    settings: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encrypt one amount.
    Encrypt {
        #[arg(long)]
        amount: String,
        #[command(flatten)]
        record: RecordFields,
        #[command(flatten)]
        params: ParamsArg,
    },
    /// Decrypt and integrity-check one ciphertext.
    Decrypt {
        #[arg(long, allow_hyphen_values = true)]
        ciphertext: String,
        #[command(flatten)]
        record: RecordFields,
        #[command(flatten)]
        params: ParamsArg,
    },
    /// Add a payment to the ledger under the current settings.
    Add {
        #[arg(long)]
        stdid: String,
        #[arg(long)]
        amount: String,
        #[command(flatten)]
        record: RecordFields,
        #[arg(long, default_value = "")]
        term: String,
        #[arg(long, default_value = "")]
        acyear: String,
        #[arg(long, default_value = "")]
        receipt: String,
        #[arg(long, default_value = "")]
        mode: String,
    },
    /// Show decrypted payments: one record by key, or all of them.
    Show {
        #[arg(long, requires_all = ["date", "time"])]
        stdid: Option<String>,
        #[arg(long)]
        date: Option<String>,
        #[arg(long)]
        time: Option<String>,
    },
    /// Check every record's integrity.
    Verify,
    /// Draw new parameters and re-encrypt the ledger.
    Rotate {
        /// Seed for the parameter generator; random when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Inspect the coding schemes.
    Schemes {
        #[command(subcommand)]
        action: SchemesCommand,
    },
    /// Cryptanalysis drivers.
    Attack {
        #[command(subcommand)]
        action: AttackCommand,
    },
}

#[derive(Debug, Args)]
struct RecordFields {
    #[arg(long)]
    date: String,
    #[arg(long)]
    time: String,
    #[arg(long)]
    cashier: String,
}

#[derive(Debug, Args)]
struct ParamsArg {
    /// p,q,m,n,z,w; defaults to the settings file.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Debug, Subcommand)]
enum SchemesCommand {
    Show {
        #[arg(long, value_enum)]
        kind: SchemeKindArg,
        #[arg(long)]
        id: u32,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeKindArg {
    K2,
    Pairs,
}

#[derive(Debug, Subcommand)]
enum AttackCommand {
    /// Known-plaintext parameter recovery by exhaustive search.
    Recover {
        /// JSON-lines file of observations.
        #[arg(long)]
        obs: PathBuf,
        /// e.g. p=0..2,q=0..2,m=1..10,n=1..10,z=1..5,w=1..5
        #[arg(long)]
        bounds: Option<String>,
    },
    /// Digit-string versus pair-symbol search-space counts.
    Space {
        #[arg(long, allow_hyphen_values = true)]
        n: i64,
    },
    /// Measure detection of single-symbol substitutions.
    Tamper {
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        /// Substitute the fraction symbol instead of an integer symbol.
        #[arg(long)]
        fraction: bool,
        #[arg(long, default_value_t = TrialConfig::default().max_integer)]
        max_integer: u64,
    },
}

/// Result of a subcommand: what to print and how to exit.
struct Outcome {
    code: i32,
    text: String,
    json: Value,
    /// Failures go to stderr; reports that carry a nonzero code still go to stdout.
    to_stderr: bool,
}

impl Outcome {
    fn ok(text: impl Into<String>, json: Value) -> Self {
        Outcome {
            code: EXIT_OK,
            text: text.into(),
            json,
            to_stderr: false,
        }
    }
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let json = cli.json;
    let outcome = dispatch(cli).unwrap_or_else(|e| error_outcome(&e));
    if json {
        let _ = writeln!(out, "{}", outcome.json);
    } else if outcome.to_stderr {
        let _ = write!(err, "{}", outcome.text);
    } else {
        let _ = write!(out, "{}", outcome.text);
    }
    outcome.code
}

fn error_outcome(e: &Error) -> Outcome {
    let (code, kind) = match e {
        Error::TamperDetected => (EXIT_TAMPER, "tamper_detected"),
        Error::RotationGenerationFailure(_) => (EXIT_ROTATION, "rotation_failure"),
        Error::Io(_) | Error::LedgerLocked(_) => (EXIT_FAILURE, "io"),
        _ => (EXIT_VALIDATION, "validation"),
    };
    let text = match e {
        Error::TamperDetected => format!("ALARM: {e}\n"),
        _ => format!("error: {e}\n"),
    };
    Outcome {
        code,
        text,
        json: json!({ "error": kind, "message": e.to_string() }),
        to_stderr: true,
    }
}

/// Quotes a ciphertext so spaces, quotes and backslashes stay unambiguous.
fn quote(ct: &str) -> String {
    serde_json::to_string(ct).expect("strings serialize")
}

fn resolve_params(arg: &ParamsArg, settings: &SettingsFile) -> Result<CryptoParams, Error> {
    match &arg.params {
        Some(s) => parse_settings(s),
        None => settings.load_or_demo(),
    }
}

fn record_keys(r: &RecordFields, params: &CryptoParams) -> Result<KeyPair, Error> {
    KeyPair::derive(
        &parse_record_date(&r.date)?,
        &parse_record_time(&r.time)?,
        &validate_cashier_id(&r.cashier)?,
        char_value_scheme(params.z)?,
    )
}

fn dispatch(cli: Cli) -> Result<Outcome, Error> {
    let settings = SettingsFile::new(&cli.settings);
    match cli.command {
        Command::Encrypt {
            amount,
            record,
            params,
        } => {
            let params = resolve_params(&params, &settings)?;
            let amount = parse_amount(&amount)?;
            let ct = encrypt_amount(&amount, &record_keys(&record, &params)?, &params)?;
            Ok(Outcome::ok(
                format!("{}\n", quote(ct.as_str())),
                json!({ "ciphertext": ct.as_str() }),
            ))
        }
        Command::Decrypt {
            ciphertext,
            record,
            params,
        } => {
            let params = resolve_params(&params, &settings)?;
            let ct = Ciphertext::new(ciphertext);
            let amount = decrypt_amount(&ct, &record_keys(&record, &params)?, &params)?;
            Ok(Outcome::ok(
                format!("{amount}\n"),
                json!({ "amount": amount.to_string() }),
            ))
        }
        Command::Add {
            stdid,
            amount,
            record,
            term,
            acyear,
            receipt,
            mode,
        } => {
            let params = settings.load_or_demo()?;
            let amount = parse_amount(&amount)?;
            let _lock = LedgerLock::acquire(&cli.ledger)?;
            let mut ledger = Ledger::open_or_create(&cli.ledger)?;
            let fields = NewPayment {
                stdid,
                date: record.date,
                time: record.time,
                term,
                acyear,
                receiptnumber: receipt,
                mode,
                cashierid: record.cashier,
            };
            let rec = ledger.add_payment(fields, &amount, &params)?;
            Ok(Outcome::ok(
                format!("added {} {}\n", rec.key()?, quote(rec.amount.as_str())),
                serde_json::to_value(rec).expect("records serialize"),
            ))
        }
        Command::Show { stdid, date, time } => {
            let params = settings.load_or_demo()?;
            let ledger = Ledger::open_or_create(&cli.ledger)?;
            match (stdid, date, time) {
                (Some(stdid), Some(date), Some(time)) => {
                    let key = RecordKey::new(stdid, parse_record_date(&date)?, parse_record_time(&time)?);
                    let amount = ledger.get_amount(&key, &params)?;
                    Ok(Outcome::ok(
                        format!("{amount}\n"),
                        json!({ "key": key_json(&key), "amount": amount.to_string() }),
                    ))
                }
                _ => Ok(show_all(&ledger, &params)),
            }
        }
        Command::Verify => {
            let params = settings.load_or_demo()?;
            let ledger = Ledger::open_or_create(&cli.ledger)?;
            Ok(verification_outcome(&ledger.verify(&params)))
        }
        Command::Rotate { seed } => {
            let old = settings.load_or_demo()?;
            let mut rng = match seed {
                Some(s) => ChaCha8Rng::seed_from_u64(s),
                None => ChaCha8Rng::from_os_rng(),
            };
            let new = next_params(&old, &mut rng)?;
            let _lock = LedgerLock::acquire(&cli.ledger)?;
            let mut ledger = Ledger::open_or_create(&cli.ledger)?;
            Ok(rotation_outcome(&rotate_ledger(&mut ledger, &settings, &old, &new)))
        }
        Command::Schemes {
            action: SchemesCommand::Show { kind, id },
        } => schemes_outcome(kind, id),
        Command::Attack { action } => attack(action),
    }
}

fn key_json(key: &RecordKey) -> Value {
    json!({ "stdid": key.stdid, "date": key.date.to_string(), "time": key.time.to_string() })
}

fn show_all(ledger: &Ledger, params: &CryptoParams) -> Outcome {
    let mut text = String::new();
    let mut rows = Vec::new();
    let mut code = EXIT_OK;
    for r in ledger.records() {
        let shown = match r.decrypt(params) {
            Ok(a) => a.to_string(),
            Err(e) => {
                code = code.max(if matches!(e, Error::TamperDetected) { EXIT_TAMPER } else { EXIT_VALIDATION });
                format!("<{e}>")
            }
        };
        text.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.stdid, r.date, r.time, r.cashierid, shown));
        rows.push(json!({
            "stdid": r.stdid, "date": r.date, "time": r.time,
            "cashierid": r.cashierid, "amount": shown,
        }));
    }
    Outcome {
        code,
        text,
        json: json!({ "records": rows }),
        to_stderr: false,
    }
}

fn verification_outcome(report: &VerificationReport) -> Outcome {
    let mut text = format!(
        "ok: {}, tampered: {}, undecodable: {}\n",
        report.ok.len(),
        report.tampered.len(),
        report.undecodable.len()
    );
    for k in &report.tampered {
        text.push_str(&format!("ALARM tampered {k}\n"));
    }
    for (k, why) in &report.undecodable {
        text.push_str(&format!("undecodable {k}: {why}\n"));
    }
    Outcome {
        code: if report.tampered.is_empty() && report.undecodable.is_empty() {
            EXIT_OK
        } else {
            EXIT_TAMPER
        },
        text,
        json: json!({
            "ok": report.ok.len(),
            "tampered": report.tampered.iter().map(key_json).collect::<Vec<_>>(),
            "undecodable": report.undecodable.iter()
                .map(|(k, why)| json!({ "key": key_json(k), "error": why }))
                .collect::<Vec<_>>(),
        }),
        to_stderr: false,
    }
}

fn rotation_outcome(report: &RotationReport) -> Outcome {
    let committed = report.committed();
    let mut text = format!(
        "{} {} -> {}: {} records in {:.3}s\n",
        if committed { "rotated" } else { "rotation aborted" },
        report.old_params,
        report.new_params,
        report.records_processed,
        report.elapsed.as_secs_f64()
    );
    for f in &report.failures {
        match &f.key {
            Some(k) => text.push_str(&format!("failed {k}: {}\n", f.error)),
            None => text.push_str(&format!("failed: {}\n", f.error)),
        }
    }
    Outcome {
        code: if committed { EXIT_OK } else { EXIT_ROTATION },
        text,
        json: json!({
            "committed": committed,
            "old_params": report.old_params.to_string(),
            "new_params": report.new_params.to_string(),
            "records_processed": report.records_processed,
            "elapsed_secs": report.elapsed.as_secs_f64(),
            "failures": report.failures.iter().map(|f| json!({
                "key": f.key.as_ref().map(key_json),
                "error": f.error,
            })).collect::<Vec<_>>(),
        }),
        to_stderr: false,
    }
}

fn schemes_outcome(kind: SchemeKindArg, id: u32) -> Result<Outcome, Error> {
    let rows: Vec<(String, String)> = match kind {
        SchemeKindArg::K2 => char_value_scheme(id)?
            .entries()
            .map(|(c, v)| (c.to_string(), v.to_string()))
            .collect(),
        SchemeKindArg::Pairs => pair_symbol_scheme(id)?
            .entries()
            .map(|(v, c)| (format!("{v:02}"), quote(&c.to_string())))
            .collect(),
    };
    let text: String = rows.iter().map(|(a, b)| format!("{a}\t{b}\n")).collect();
    let json = match kind {
        SchemeKindArg::K2 => json!({
            "kind": "k2", "id": id,
            "entries": char_value_scheme(id)?.entries().map(|(c, v)| json!([c.to_string(), v])).collect::<Vec<_>>(),
        }),
        SchemeKindArg::Pairs => json!({
            "kind": "pairs", "id": id,
            "entries": pair_symbol_scheme(id)?.entries().map(|(v, c)| json!([format!("{v:02}"), c.to_string()])).collect::<Vec<_>>(),
        }),
    };
    Ok(Outcome::ok(text, json))
}

fn tamper_json(c: &TamperCounts) -> Value {
    json!({
        "trials": c.trials, "detected": c.detected,
        "silent_same": c.silent_same, "silent_wrong": c.silent_wrong,
        "rate": c.rate(),
    })
}

fn load_observations(path: &PathBuf) -> Result<Vec<Observation>, Error> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let rec: ObservationRecord =
                serde_json::from_str(line).map_err(|e| Error::MalformedRecordLine {
                    path: path.clone(),
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            Observation::try_from(rec)
        })
        .collect()
}

fn attack(action: AttackCommand) -> Result<Outcome, Error> {
    match action {
        AttackCommand::Recover { obs, bounds } => {
            let observations = load_observations(&obs)?;
            let bounds: ParamBounds = bounds.as_deref().unwrap_or("").parse()?;
            let set = recover_params(&observations, &bounds)?;
            let mut text = format!(
                "bounds: {bounds}\nexamined: {}\ncandidates: {}\n",
                set.space_size,
                set.tuples.len()
            );
            for t in &set.tuples {
                text.push_str(&format!("  {t}\n"));
            }
            Ok(Outcome::ok(
                text,
                json!({
                    "bounds": bounds.to_string(),
                    "space_size": set.space_size,
                    "candidates": set.tuples.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                }),
            ))
        }
        AttackCommand::Space { n } => {
            let (ungrouped, grouped) = grouping_space(n)?;
            let equal = ungrouped == grouped;
            Ok(Outcome::ok(
                format!("n: {n}\nungrouped (10^n): {ungrouped}\ngrouped (100^(n/2)): {grouped}\nequal: {equal}\n"),
                json!({
                    "n": n, "ungrouped": ungrouped.to_string(),
                    "grouped": grouped.to_string(), "equal": equal,
                }),
            ))
        }
        AttackCommand::Tamper {
            trials,
            seed,
            fraction,
            max_integer,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let config = TrialConfig { max_integer };
            let counts = if fraction {
                fraction_tamper_outcomes(trials, &mut rng, &config)?
            } else {
                tamper_detection_rate(trials, &mut rng, &config)?
            };
            let region = if fraction { "fraction" } else { "integer" };
            Ok(Outcome::ok(
                format!(
                    "region: {region}\ntrials: {}\ndetected: {}\nsilent_same: {}\nsilent_wrong: {}\nrate: {:.4}\n",
                    counts.trials, counts.detected, counts.silent_same, counts.silent_wrong, counts.rate()
                ),
                {
                    let mut v = tamper_json(&counts);
                    v["region"] = json!(region);
                    v["seed"] = json!(seed);
                    v
                },
            ))
        }
    }
}
