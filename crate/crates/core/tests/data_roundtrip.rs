use proptest::prelude::*;
use scorefuse::data::{load_records, save_records, Dataset, Format, Label, ScoreRecord, Split};

fn record_strategy(n: usize, m: usize) -> impl Strategy<Value = (Label, Split, Vec<f64>, Vec<f64>, Option<f64>)> {
    let label = prop_oneof![Just(Label::Bonafide), Just(Label::Spoof)];
    let split = prop_oneof![Just(Split::Train), Just(Split::Valid), Just(Split::Eval)];
    (
        label,
        split,
        prop::collection::vec(0.0f64..=1.0, n),
        prop::collection::vec(0.0f64..=5.0, m),
        prop::option::of(0.0f64..=5.0),
    )
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (prop::sample::select(vec![1usize, 7, 16]), prop::sample::select(vec![0usize, 1, 7]))
        .prop_flat_map(|(n, m)| {
            prop::collection::vec(record_strategy(n, m), 0..25).prop_map(move |rows| {
                let records = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (label, split, fad, mos, mos_fused))| ScoreRecord {
                        utt_id: format!("utt-{i:04}"),
                        label,
                        split,
                        fad,
                        mos,
                        mos_fused,
                    })
                    .collect();
                Dataset::with_dims(records, n, m).unwrap()
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn both_formats_round_trip_bit_exactly(ds in dataset_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        for (name, format) in [("d.jsonl", Format::Jsonl), ("d.csv", Format::Csv)] {
            let path = dir.path().join(name);
            save_records(&ds, &path, format).unwrap();
            let back = load_records(&path, format).unwrap();
            prop_assert_eq!(back.records(), ds.records());
            if !ds.is_empty() {
                prop_assert_eq!(back.fad_dim(), ds.fad_dim());
                prop_assert_eq!(back.mos_dim(), ds.mos_dim());
            }
        }
    }
}

#[test]
fn unknown_label_only_in_eval() {
    let rec = |split| ScoreRecord {
        utt_id: "u".into(),
        label: Label::Unknown,
        split,
        fad: vec![0.5],
        mos: vec![],
        mos_fused: None,
    };
    assert!(rec(Split::Eval).validate().is_ok());
    assert!(rec(Split::Train).validate().is_err());
}

#[test]
fn malformed_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("range.jsonl", r#"{"utt_id":"a","label":"spoof","split":"train","fad":[1.5]}"#),
        ("extra.jsonl", r#"{"utt_id":"a","label":"spoof","split":"train","fad":[0.5],"x":1}"#),
        (
            "dims.jsonl",
            "{\"utt_id\":\"a\",\"label\":\"spoof\",\"split\":\"train\",\"fad\":[0.5]}\n{\"utt_id\":\"b\",\"label\":\"spoof\",\"split\":\"train\",\"fad\":[0.5,0.1]}",
        ),
        (
            "dup.jsonl",
            "{\"utt_id\":\"a\",\"label\":\"spoof\",\"split\":\"train\",\"fad\":[0.5]}\n{\"utt_id\":\"a\",\"label\":\"spoof\",\"split\":\"train\",\"fad\":[0.5]}",
        ),
        ("nan.csv", "utt_id,label,split,mos_fused,fad_0\na,spoof,train,,NaN\n"),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        assert!(load_records(&path, Format::from_path(&path)).is_err(), "{name} accepted");
    }
}
