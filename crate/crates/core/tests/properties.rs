use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use qcantor::blocks::{cbw_count_bounds, cbw_digit_at, concat_lexicographic, ApVariant, Block};
use qcantor::constructions::{dichotomy_inequality, ExactRatio};
use qcantor::descriptor::DescriptorParser;
use qcantor::digits::DigitStream;
use qcantor::diophantine::{ap_product_sum, consecutive_product_sum};
use qcantor::stats::{count_chunked, count_sequential, predicted_limit, Mode};

fn naive_count(digits: &[u64], block: &[u64], mode: Mode, horizon: u64) -> u64 {
    let at = |s: &[u64], p: usize| s.len() >= p + block.len() && &s[p..p + block.len()] == block;
    match mode {
        Mode::Plain => (1..=horizon).filter(|&p| at(digits, p as usize - 1)).count() as u64,
        Mode::ApI { m, r } => (1..=horizon).filter(|&p| p % m == r && at(digits, p as usize - 1)).count() as u64,
        Mode::ApII { m, r } => {
            let sub: Vec<u64> = (1..=digits.len() as u64).filter(|p| p % m == r).map(|p| digits[p as usize - 1]).collect();
            (1..=horizon).filter(|&t| at(&sub, t as usize - 1)).count() as u64
        }
    }
}

fn mode_strategy() -> impl Strategy<Value = Mode> {
    (0..3u8, 1..=6u64, 0..6u64).prop_map(|(kind, m, r)| {
        let r = r % m;
        match kind {
            0 => Mode::Plain,
            1 => Mode::ApI { m, r },
            _ => Mode::ApII { m, r },
        }
    })
}

fn rationals(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec((1..=9i64, 1..=4i64), len)
        .prop_map(|v| v.into_iter().map(|(n, d)| BigRational::new(n.into(), d.into())).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn streaming_and_chunked_counts_match_a_scan(
        digits in prop::collection::vec(0..3u64, 1..400),
        blocks in prop::collection::vec(prop::collection::vec(0..3u64, 1..=4), 1..4),
        mode in mode_strategy(),
        horizon in 1..300u64,
        chunks in 1..9usize,
    ) {
        let m = mode.progression().m;
        // Pad so the type II subsequence reaches past the horizon.
        let mut digits = digits;
        digits.resize(((horizon + 5) * m + 5) as usize, 0);
        let x = DigitStream::explicit(digits.clone(), vec![0]);
        let blocks: Vec<Block> = blocks.into_iter().map(Block::new).collect();
        let want: Vec<u64> = blocks.iter().map(|b| naive_count(&digits, b.digits(), mode, horizon)).collect();
        prop_assert_eq!(&count_sequential(&x, &blocks, mode, horizon).unwrap(), &want);
        prop_assert_eq!(&count_chunked(&x, &blocks, mode, horizon, chunks).unwrap(), &want);
    }

    #[test]
    fn cbw_random_access_matches_materialized(b in 2..5u64, w in 1..5u64, seed in any::<u64>()) {
        let y = concat_lexicographic(b, w, 1 << 16).unwrap();
        let p = seed % y.len() as u64 + 1;
        prop_assert_eq!(cbw_digit_at(b, w, &BigUint::from(p)).unwrap(), y.digits()[p as usize - 1]);
    }

    #[test]
    fn cbw_type_one_bounds_hold_for_every_block(b in 2..4u64, w in prop::sample::select(vec![2u64, 4, 6]), m in 1..=2u64, r in 0..2u64, k in 1..=3u64, code in any::<u64>()) {
        prop_assume!(r < m && k <= w);
        let y = concat_lexicographic(b, w, 1 << 16).unwrap();
        let block: Vec<u64> = (0..k).map(|i| (code / b.pow(i as u32)) % b).collect();
        let n = naive_count(y.digits(), &block, Mode::ApI { m, r }, y.len() as u64);
        let bounds = cbw_count_bounds(b, w, m, r, k);
        let n = BigRational::from_integer(n.into());
        prop_assert!(bounds.lo_i <= n && n < bounds.hi_i);
    }

    #[test]
    fn progression_sums_partition_the_plain_sum(c in rationals(2..=9), k in 1..=4u64, m in 1..=4u64) {
        prop_assume!(k <= c.len() as u64);
        let t = c.len() as u64;
        let total = (0..m)
            .filter(|&r| r + k <= t)
            .map(|r| ap_product_sum(&c, k, m, r, ApVariant::TypeI).unwrap())
            .fold(BigRational::zero(), |a, b| a + b);
        prop_assert_eq!(total, consecutive_product_sum(&c, k).unwrap());
        prop_assert_eq!(
            ap_product_sum(&c, k, 1, 0, ApVariant::TypeII).unwrap(),
            consecutive_product_sum(&c, k).unwrap()
        );
    }

    #[test]
    fn product_sums_scale_homogeneously(c in rationals(1..=8), k in 1..=4u64, num in 1..=5i64, den in 1..=5i64) {
        prop_assume!(k <= c.len() as u64);
        let lambda = BigRational::new(num.into(), den.into());
        let scaled: Vec<BigRational> = c.iter().map(|x| x * &lambda).collect();
        let mut lk = BigRational::one();
        for _ in 0..k {
            lk *= &lambda;
        }
        prop_assert_eq!(consecutive_product_sum(&scaled, k).unwrap(), consecutive_product_sum(&c, k).unwrap() * lk);
    }

    #[test]
    fn all_ones_limits_have_closed_form(t in 2..=12u64, k in 1..=12u64) {
        prop_assume!(k <= t);
        let ones = vec![BigRational::one(); t as usize];
        let want = BigRational::new(t.into(), (t - k + 1).into());
        prop_assert_eq!(predicted_limit(&ones, t, k, Mode::Plain).unwrap(), want);
    }

    #[test]
    fn dichotomy_inequality_holds_from_three(k in 3..=200u64) {
        prop_assert!(dichotomy_inequality(k));
    }

    #[test]
    fn exact_ratio_order_agrees_with_log2(a in 1..u64::MAX, b in 1..u64::MAX, c in 1..u64::MAX, d in 1..u64::MAX) {
        let x = ExactRatio::new(a.into(), b.into()).unwrap();
        let y = ExactRatio::new(c.into(), d.into()).unwrap();
        let (lx, ly) = (x.log2(), y.log2());
        if (lx - ly).abs() > 1e-9 {
            prop_assert_eq!(x.cmp_ratio(&y), lx.partial_cmp(&ly).unwrap());
        }
    }

    #[test]
    fn psi_clamps_exactly_where_digits_exceed_the_target(seed in any::<u64>(), n in 1..2000u64) {
        let parser = DescriptorParser::new();
        let p = "explicit:7,3,5";
        let q = "explicit:2,6,4,3";
        let x = parser.stream(&format!("random:seed={seed};q=[{p}]")).unwrap();
        let y = parser.stream(&format!("psi:x=[random:seed={seed};q=[{p}]];p=[{p}];q=[{q}]")).unwrap();
        let qn = parser.sequence(q).unwrap().q_at(n).unwrap().to_u64().unwrap();
        prop_assert_eq!(y.digit_at(n).unwrap(), x.digit_at(n).unwrap().min(qn - 1));
    }

    #[test]
    fn block_and_mode_text_round_trips(digits in prop::collection::vec(0..20u64, 1..6), mode in mode_strategy()) {
        let b = Block::new(digits);
        prop_assert_eq!(b.to_string().parse::<Block>().unwrap(), b);
        prop_assert_eq!(mode.to_string().parse::<Mode>().unwrap(), mode);
    }
}
