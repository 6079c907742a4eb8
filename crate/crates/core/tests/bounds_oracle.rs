//! Bound constants against values from an independent 40-digit evaluation.

use rpn_eigen::bounds::{bound_constants, ratio_table};

// (n, A_n, B_n, A_n / B_n)
const ORACLE: [(usize, f64, f64, f64); 7] = [
    (2, 10.0, 12.0, 0.833_333_333_333_333_4),
    (3, 10.292_375_136_131_286, 12.699_208_415_745_597, 0.810_473_755_464_151),
    (4, 11.489_125_293_076_057, 14.142_135_623_730_951, 0.812_403_840_463_596),
    (5, 13.011_051_676_639_51, 15.834_094_929_274_73, 0.821_711_107_250_224_9),
    (10, 22.168_162_843_355_26, 25.271_363_809_934_77, 0.877_204_847_751_051_3),
    (64, 130.000_000_001_151_85, 132.846_629_325_035_17, 0.978_572_062_096_370_6),
    (1000, 2002.0, 2_004.777_285_934_091_7, 0.998_614_666_101_028_9),
];

#[test]
fn constants_match_high_precision_values() {
    for (n, a, b, r) in ORACLE {
        let p = bound_constants(n).unwrap();
        assert!((p.a / a - 1.0).abs() < 1e-14, "A_{n}: {} vs {a}", p.a);
        assert!((p.b / b - 1.0).abs() < 1e-14, "B_{n}: {} vs {b}", p.b);
        assert!((p.ratio / r - 1.0).abs() < 1e-14, "ratio {n}: {} vs {r}", p.ratio);
    }
}

#[test]
fn lower_margin_at_64() {
    // A_64 / B_64 - 2^{-1/32} = 8.6705115996916e-12
    let p = bound_constants(64).unwrap();
    assert!((p.lower_margin / 8.670_511_599_691_63e-12 - 1.0).abs() < 1e-10, "{}", p.lower_margin);
}

#[test]
fn table_up_to_64() {
    let rows = ratio_table(64).unwrap();
    assert_eq!(rows.len(), 63);
    assert!(rows.iter().all(|r| r.ratio < 1.0 && r.ratio >= r.lower_bound));
    assert!(rows.last().unwrap().ratio > 1.0 - 10.0 / 64.0);
    // The ratio dips at n = 3 and then increases.
    assert!(rows.windows(2).skip(1).all(|w| w[1].ratio > w[0].ratio));
    assert!(rows[1].ratio < rows[0].ratio);
}
