use mlfeedback_cli::scenario::{Kind, Scenario, Value, KEYS};
use mlfeedback_cli::CliError;
use proptest::prelude::*;

fn value_for(kind: Kind) -> BoxedStrategy<Value> {
    let float = prop_oneof![
        -1e6f64..1e6,
        (-1000i64..1000).prop_map(|n| n as f64),
        Just(0.1),
        Just(1e-300),
        Just(-0.0),
        Just(f64::MAX),
    ];
    match kind {
        Kind::Float => float.prop_map(Value::Float).boxed(),
        Kind::Int => any::<u64>().prop_map(Value::Int).boxed(),
        Kind::Bool => any::<bool>().prop_map(Value::Bool).boxed(),
        Kind::Choice(options) => proptest::sample::select(options.to_vec())
            .prop_map(|s| Value::Choice(s.to_string()))
            .boxed(),
        Kind::List => proptest::collection::vec(float, 0..5).prop_map(Value::List).boxed(),
    }
}

fn scenario() -> impl Strategy<Value = Scenario> {
    let entries: Vec<_> = KEYS
        .iter()
        .map(|k| proptest::option::of(value_for(k.kind)).prop_map(move |v| (k, v)))
        .collect();
    entries.prop_map(|entries| {
        let mut s = Scenario::default();
        for (k, v) in entries {
            if let Some(v) = v {
                s.set(k.section, k.key, v).unwrap();
            }
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parse_serialize_parse_is_identity(s in scenario()) {
        let text = s.serialize();
        let back = Scenario::parse(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn undeclared_keys_are_rejected(section in proptest::sample::select(vec!["market", "ml", "feedback", "loop", "mdp", "sweep"]), key in "[a-z_]{1,12}") {
        prop_assume!(!KEYS.iter().any(|k| k.section == section && k.key == key));
        let text = format!("[{section}]\n{key} = 1\n");
        prop_assert!(matches!(Scenario::parse(&text), Err(CliError::Config(_))));
    }
}

#[test]
fn every_key_is_documented_once() {
    for (i, a) in KEYS.iter().enumerate() {
        assert!(!a.unit.is_empty() && !a.doc.is_empty(), "{}", a.key);
        assert!(!KEYS[i + 1..].iter().any(|b| a.section == b.section && a.key == b.key), "{}", a.key);
    }
}

#[test]
fn wrong_type_is_rejected_by_set() {
    let mut s = Scenario::default();
    assert!(s.set("market", "mu", Value::Int(3)).is_err());
    assert!(s.set("feedback", "mode", Value::Choice("sideways".into())).is_err());
    assert!(s.set("market", "nope", Value::Float(1.0)).is_err());
    assert!(s.set("market", "mu", Value::Float(f64::NAN)).is_err());
}
