use fieldcrypt::cipher::{encrypt_amount, CryptoParams};
use fieldcrypt::codec::char_value_scheme;
use fieldcrypt::cryptanalysis::{recover_params, Observation, ParamBounds};
use fieldcrypt::keys::{parse_amount, parse_record_date, parse_record_time, validate_cashier_id, KeyPair};

fn observation(params: &CryptoParams, amount: &str, date: &str, time: &str, cashier: &str) -> Observation {
    let date = parse_record_date(date).unwrap();
    let time = parse_record_time(time).unwrap();
    let cashier = validate_cashier_id(cashier).unwrap();
    let amount = parse_amount(amount).unwrap();
    let keys = KeyPair::derive(&date, &time, &cashier, char_value_scheme(params.z).unwrap()).unwrap();
    Observation {
        ciphertext: encrypt_amount(&amount, &keys, params).unwrap(),
        amount,
        date,
        time,
        cashier,
    }
}

#[test]
fn reduced_bounds_recover_hidden_tuple() {
    let hidden = CryptoParams::new(2, 0, 4, 9, 5, 3).unwrap();
    let obs = [
        observation(&hidden, "50.00", "21/05/12", "15:50:08", "CE840716"),
        observation(&hidden, "3.99", "02-01-13", "07:00:45", "Q7Z"),
    ];
    let bounds: ParamBounds = "p=0..2,q=0..2,m=1..10,n=1..10,z=1..5,w=1..5".parse().unwrap();
    let set = recover_params(&obs, &bounds).unwrap();
    assert!(set.contains(&hidden));
    assert_eq!(set.space_size, 22_500);
}

#[test]
#[ignore = "searches all 14,062,500 tuples; run with --ignored"]
fn full_space_recovers_hidden_tuple() {
    let hidden = CryptoParams::new(3, 4, 37, 12, 14, 11).unwrap();
    let obs = [
        observation(&hidden, "50.00", "21/05/12", "15:50:08", "CE840716"),
        observation(&hidden, "3.99", "02-01-13", "07:00:45", "Q7Z"),
        observation(&hidden, "815.20", "30/09/11", "23:11:02", "AB99CD"),
    ];
    let set = recover_params(&obs, &ParamBounds::full()).unwrap();
    assert_eq!(set.space_size, 14_062_500);
    assert!(set.contains(&hidden));
}
