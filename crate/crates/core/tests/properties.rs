use mpe_core::errorprob::{error_floor_violations, ml_filters, pe_average, pe_ml, pe_user};
use mpe_core::model::{enumerate_symbols, read_precoder_csv, write_precoder_csv, ChannelSet, SystemConfig};
use mpe_core::precoders::{mmse, mpe_joint, MpeOptions};
use mpe_core::selection::{d_rc, gus, sus, AlphaRule};
use mpe_core::sim::{expected_throughput, realization_seed, snr_grid, wilson};
use mpe_core::{CMatrix, Complex64, ReceiveFilters};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn nonzero_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(complex(), len).prop_filter("nonzero", |v| v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3)
}

fn channels(users: usize, antennas: usize) -> impl Strategy<Value = ChannelSet> {
    prop::collection::vec(nonzero_vec(antennas), users).prop_map(|rows| ChannelSet::from_rows(rows).unwrap())
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(complex(), rows * cols).prop_map(move |v| CMatrix::from_vec(rows, cols, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_rc_symmetric_and_phase_blind(a in nonzero_vec(3), b in nonzero_vec(3)) {
        prop_assert!((d_rc(&a, &b).unwrap() - d_rc(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((d_rc(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let rotated: Vec<Complex64> = a.iter().map(|z| z * Complex64::i()).collect();
        prop_assert!(d_rc(&a, &rotated).unwrap() < 1e-12);
    }

    #[test]
    fn pe_is_scale_invariant_in_filters(ch in channels(3, 2), u in matrix(2, 3), w in complex(), scale in 1e-3f64..1e3) {
        prop_assume!(w.norm() > 1e-3);
        let book = enumerate_symbols(3).unwrap();
        for j in 0..3 {
            let a = pe_user(j, w, &u, &ch, &book, 0.4).unwrap();
            let b = pe_user(j, w * scale, &u, &ch, &book, 0.4).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn floor_violations_force_pe_above_inverse_book_size(ch in channels(3, 2), u in matrix(2, 3), w in complex()) {
        prop_assume!(w.norm() > 1e-3);
        let book = enumerate_symbols(3).unwrap();
        for j in 0..3 {
            let v = error_floor_violations(j, w, &u, &ch, &book).unwrap();
            for &b in &v {
                prop_assert!(v.contains(&book.negation(b)));
            }
            if !v.is_empty() {
                prop_assert!(pe_user(j, w, &u, &ch, &book, 1e-6).unwrap() > 1.0 / book.len() as f64);
            }
        }
    }

    #[test]
    fn ml_filters_match_ml_error_probability(ch in channels(2, 3), u in matrix(3, 2)) {
        let book = enumerate_symbols(2).unwrap();
        let config = SystemConfig::new(3, 2, 0.5, 1.0).unwrap();
        if let Ok(w) = ml_filters(&u, &ch) {
            let a = pe_average(&w, &u, &ch, &book, &config).unwrap().average;
            let b = pe_ml(&u, &ch, &book, 0.5).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_precoder_is_a_coin_flip(ch in channels(2, 2), w in complex()) {
        prop_assume!(w.norm() > 1e-3);
        let book = enumerate_symbols(2).unwrap();
        let config = SystemConfig::new(2, 2, 0.1, 1.0).unwrap();
        let pe = pe_average(&ReceiveFilters(vec![w; 2]), &CMatrix::zeros(2, 2), &ch, &book, &config).unwrap();
        prop_assert!((pe.average - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symbol_book_rows_follow_binary_order(k in 1usize..8) {
        let book = enumerate_symbols(k).unwrap();
        prop_assert_eq!(book.len(), 1 << k);
        for b in 0..book.len() {
            for j in 0..k {
                prop_assert_eq!(book.sign(b, j), if (b >> j) & 1 == 1 { 1.0 } else { -1.0 });
                prop_assert_eq!(book.sign(book.negation(b), j), -book.sign(b, j));
            }
        }
    }

    #[test]
    fn channel_csv_round_trip(ch in channels(3, 4)) {
        let mut buf = Vec::new();
        ch.write_csv(&mut buf).unwrap();
        prop_assert_eq!(ChannelSet::read_csv(buf.as_slice()).unwrap(), ch);
    }

    #[test]
    fn precoder_csv_round_trip(u in matrix(3, 2)) {
        let mut buf = Vec::new();
        write_precoder_csv(&u, &mut buf).unwrap();
        prop_assert_eq!(read_precoder_csv(buf.as_slice()).unwrap(), u);
    }

    #[test]
    fn mmse_meets_power_budget(ch in channels(3, 3), snr in -5.0f64..25.0) {
        let config = SystemConfig::at_snr_db(3, 3, snr).unwrap();
        let r = mmse(&ch, &config).unwrap();
        prop_assert!((r.u.norm_squared() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gus_selection_is_a_packing(ch in channels(25, 3)) {
        let out = gus(&ch, AlphaRule::Adaptive, None);
        prop_assert!(!out.selected.is_empty());
        let mut s = out.selected.clone();
        s.sort();
        s.dedup();
        prop_assert_eq!(s.len(), out.selected.len());
        prop_assert!(out.iterations <= 9);
        if out.packing_k > 1 {
            let limit = 1.0 / (out.packing_k as f64 - 1.0);
            for (i, &a) in out.selected.iter().enumerate() {
                for &b in &out.selected[i + 1..] {
                    prop_assert!(d_rc(ch.row(a), ch.row(b)).unwrap() <= limit + 1e-12);
                }
            }
        }
    }

    #[test]
    fn sus_never_exceeds_antennas(ch in channels(20, 3), eps in 0.05f64..0.95) {
        let out = sus(&ch, eps, 3).unwrap();
        prop_assert!(!out.selected.is_empty() && out.selected.len() <= 3);
    }

    #[test]
    fn wilson_brackets_the_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let errors = (frac * trials as f64).floor() as u64;
        let (lo, hi) = wilson(errors, trials);
        let p = errors as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn throughput_shrinks_with_frame_length(pe in 1e-9f64..0.5, k in 0.5f64..8.0) {
        let short = expected_throughput(pe, 100, k);
        prop_assert!(expected_throughput(pe, 500, k) < short && short <= k);
    }

    #[test]
    fn snr_grid_spans_the_range(start in -20.0f64..20.0, span in 0.0f64..30.0, step in 0.1f64..5.0) {
        let g = snr_grid(start, start + span, step).unwrap();
        prop_assert_eq!(g[0], start);
        prop_assert!(*g.last().unwrap() <= start + span + 1e-9);
        prop_assert!(*g.last().unwrap() + step > start + span - 1e-6);
    }

    #[test]
    fn realization_seeds_are_pure(seed in any::<u64>(), r in 0usize..10_000) {
        prop_assert_eq!(realization_seed(seed, r), realization_seed(seed, r));
        prop_assert_ne!(realization_seed(seed, r), realization_seed(seed, r + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn joint_design_never_increases_error(ch in channels(3, 3), snr in 0.0f64..15.0, seed in any::<u64>()) {
        let config = SystemConfig::at_snr_db(3, 3, snr).unwrap();
        let r = mpe_joint(&ch, &config, &MpeOptions { seed, ..MpeOptions::default() }).unwrap();
        for w in r.pe_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(r.u.norm_squared() <= 1.0 + 1e-9);
        for j in 0..3 {
            prop_assert!((r.w.get(j).norm() - 1.0).abs() < 1e-9);
        }
    }
}
