use std::collections::{BTreeSet, HashSet};

use loadcnn::data::{
    build_series, build_windows, encode_customer_id, gen_synthetic, parse_readings_str,
    serialize_readings, series_to_readings, split, SeriesOptions, SplitSpec, SynthConfig,
};
use loadcnn::pipeline::default_epoch;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn id_encoding_is_injective_over_population() {
    let mut seen = HashSet::new();
    for i in 0..929 {
        let v = encode_customer_id(i, 929).unwrap();
        let d = v.data();
        assert_eq!(d[..31].iter().sum::<f64>(), 1.0);
        assert_eq!(d[31..].iter().sum::<f64>(), 1.0);
        assert_eq!(d[i / 31], 1.0);
        assert_eq!(d[31 + i % 31], 1.0);
        assert!(seen.insert(d.iter().map(|x| x.to_bits()).collect::<Vec<_>>()));
    }
    assert_eq!(seen.len(), 929);
}

#[test]
fn windows_reshape_round_trip() {
    for s in gen_synthetic(&SynthConfig::new(5, 40, 8)) {
        let windows = build_windows(&s, 1).unwrap();
        assert_eq!(windows.len(), 33);
        for (k, w) in windows.iter().enumerate() {
            assert_eq!(w.history.shape(), &[7, 48]);
            assert_eq!(w.history.data(), &s.values[48 * k..48 * (k + 7)]);
            assert_eq!(w.target.data(), s.day(k + 7));
        }
    }
}

#[test]
fn synthetic_text_round_trips() {
    let series = gen_synthetic(&SynthConfig::new(5, 40, 3));
    let text = serialize_readings(&series_to_readings(&series));
    let parsed = parse_readings_str(&text).unwrap();
    assert_eq!(parsed.len(), 5 * 40 * 48);
    assert_eq!(serialize_readings(&parsed), text);

    let rebuilt = build_series(&parsed, &SeriesOptions::new(default_epoch())).unwrap();
    assert!(rebuilt.dropped.is_empty());
    assert_eq!(rebuilt.filled_slots, 0);
    assert_eq!(rebuilt.series, series);
}

#[test]
fn shuffled_lines_build_the_same_series() {
    let series = gen_synthetic(&SynthConfig::new(4, 12, 5));
    let text = serialize_readings(&series_to_readings(&series));
    let mut lines: Vec<&str> = text.lines().collect();
    lines.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let shuffled = lines.join("\n");
    let opts = SeriesOptions::new(default_epoch());
    let a = build_series(&parse_readings_str(&text).unwrap(), &opts).unwrap();
    let b = build_series(&parse_readings_str(&shuffled).unwrap(), &opts).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.id_map, b.id_map);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_windows(
        test_days in 1u32..10,
        validation_days in 0u32..10,
        lo in 8u32..20,
        seed in any::<u64>(),
    ) {
        let series = gen_synthetic(&SynthConfig::new(3, 40, 1));
        let windows: Vec<_> = series.iter().flat_map(|s| build_windows(s, 1).unwrap()).collect();
        let n = windows.len();
        let spec = SplitSpec { test_days, validation_days, validation_range: (lo, 40), seed };
        let Ok(parts) = split(windows.clone(), &spec) else {
            // Only infeasible when too few candidate days remain.
            prop_assert!(40 - test_days + 1 - lo < validation_days);
            return Ok(());
        };
        prop_assert_eq!(parts.train.len() + parts.validation.len() + parts.test.len(), n);
        let key = |w: &loadcnn::data::Window| (w.customer_index, w.target_day);
        let sets: Vec<BTreeSet<_>> = [&parts.train, &parts.validation, &parts.test]
            .iter()
            .map(|p| p.iter().map(key).collect())
            .collect();
        prop_assert!(sets[0].is_disjoint(&sets[1]));
        prop_assert!(sets[0].is_disjoint(&sets[2]));
        prop_assert!(sets[1].is_disjoint(&sets[2]));
        prop_assert_eq!(parts.days.test.len() as u32, test_days);
        prop_assert_eq!(parts.days.validation.len() as u32, validation_days);
        prop_assert!(parts.test.iter().all(|w| w.target_day > 40 - test_days));

        let again = split(windows, &spec).unwrap();
        prop_assert_eq!(again.days, parts.days);
    }
}
