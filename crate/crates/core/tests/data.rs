use proptest::prelude::*;
use wiae::data::{
    generate, lar_recursion, load_csv, load_csv_with_split, ma_recursion, make_blocks, write_csv, GeneratorSpec,
    ProcessKind, SeriesDataset, Standardizer,
};
use wiae::Error;

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn generated_series_have_the_requested_length_and_split() {
    for kind in [ProcessKind::Lar, ProcessKind::Ma, ProcessKind::Mc] {
        let ds = generate(&GeneratorSpec::new(kind, 20_000, 4)).unwrap();
        assert_eq!(ds.len(), 20_000);
        assert_eq!(ds.train_end, 16_000);
        assert_eq!(ds.period_seconds, 300);
    }
    assert!(generate(&GeneratorSpec::new(ProcessKind::Lar, 0, 1)).is_err());
}

#[test]
fn recursions_follow_their_definitions() {
    let u = [0.2, -0.4, 0.9, 0.1, -1.0];
    let x = lar_recursion(u, 5, 0);
    let mut prev = 0.0;
    for (k, v) in x.iter().enumerate() {
        assert!((v - (0.5 * prev + u[k])).abs() < 1e-15);
        prev = *v;
    }
    let y = ma_recursion(u, 5, 0);
    assert_eq!(y[0], u[0]);
    for k in 1..5 {
        assert!((y[k] - (u[k] + 2.5 * u[k - 1])).abs() < 1e-15);
    }
    assert_eq!(lar_recursion(u, 3, 2), x[2..].to_vec());
}

#[test]
fn mc_emits_two_states_with_persistence() {
    let v = generate(&GeneratorSpec::new(ProcessKind::Mc, 20_000, 9)).unwrap().values;
    assert!(v.iter().all(|x| *x == 0.0 || *x == 1.0));
    let stays = v.windows(2).filter(|w| w[0] == w[1]).count() as f64 / (v.len() - 1) as f64;
    assert!((stays - 0.6).abs() < 0.02, "stay frequency {stays}");
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate(&GeneratorSpec::new(ProcessKind::Lar, 300, 2)).unwrap();
    let p = dir.path().join("s.csv");
    write_csv(&ds, &p, Some("deadbeef")).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("# config_hash=deadbeef\ntimestamp,value\n"));
    assert_eq!(text.lines().count(), 302);
    let back = load_csv(&p).unwrap();
    assert_eq!(back.values, ds.values);
    assert_eq!((back.period_seconds, back.start, back.train_end), (300, ds.start, ds.train_end));
}

#[test]
fn malformed_csv_is_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad_value = write(&dir, "a.csv", "timestamp,value\n2024-01-01T00:00:00Z,1\n2024-01-01T00:05:00Z,abc\n");
    assert!(matches!(load_csv(bad_value), Err(Error::Parse { line: 3, .. })));
    let bad_header = write(&dir, "b.csv", "time,price\n2024-01-01T00:00:00Z,1\n");
    assert!(matches!(load_csv(bad_header), Err(Error::Parse { .. })));
    let irregular = write(
        &dir,
        "c.csv",
        "timestamp,value\n2024-01-01T00:00:00Z,1\n2024-01-01T00:05:00Z,2\n2024-01-01T00:15:00Z,3\n",
    );
    assert!(matches!(load_csv(irregular), Err(Error::Format(_))));
    let backwards = write(&dir, "d.csv", "timestamp,value\n2024-01-01T00:05:00Z,1\n2024-01-01T00:00:00Z,2\n");
    assert!(matches!(load_csv(backwards), Err(Error::Format(_))));
    let nan = write(&dir, "e.csv", "timestamp,value\n2024-01-01T00:00:00Z,NaN\n");
    assert!(matches!(load_csv(nan), Err(Error::Data(_))));
    assert!(matches!(load_csv(dir.path().join("missing.csv")), Err(Error::Io(_))));
    let ok = write(&dir, "f.csv", "timestamp,value\n2024-01-01 00:00,1\n2024-01-01 01:00,2\n");
    assert_eq!(load_csv_with_split(ok, 0.5).unwrap().period_seconds, 3600);
}

#[test]
fn standardizer_fits_the_training_split() {
    let values: Vec<f64> = (0..10).map(f64::from).chain([1000.0, 2000.0]).collect();
    let ds = SeriesDataset::with_split("x", values, 60, wiae::data::synthetic_start(), 10).unwrap();
    let st = ds.standardizer().unwrap();
    assert!((st.mean - 4.5).abs() < 1e-12);
    assert!(matches!(Standardizer::fit(&[3.0; 5]), Err(Error::DegenerateData(_))));
}

proptest! {
    #[test]
    fn standardize_round_trips(values in prop::collection::vec(-1e4f64..1e4, 2..50)) {
        prop_assume!(values.iter().any(|v| *v != values[0]));
        let st = Standardizer::fit(&values).unwrap();
        let z = st.apply(&values);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        prop_assert!(mean.abs() < 1e-9);
        for (a, b) in st.invert(&z).iter().zip(&values) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn blocks_are_newest_first_windows(values in prop::collection::vec(-10f64..10.0, 1..40), n in 1usize..10) {
        prop_assume!(n <= values.len());
        let blocks = make_blocks(&values, n).unwrap();
        prop_assert_eq!(blocks.len(), values.len() - n + 1);
        for (i, b) in blocks.iter().enumerate() {
            let t = i + n - 1;
            for (j, v) in b.iter().enumerate() {
                prop_assert_eq!(*v, values[t - j]);
            }
        }
    }

    #[test]
    fn generators_are_seed_deterministic(seed in 0u64..1000, len in 1usize..200) {
        let a = generate(&GeneratorSpec::new(ProcessKind::Lar, len, seed)).unwrap();
        let b = generate(&GeneratorSpec::new(ProcessKind::Lar, len, seed)).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
