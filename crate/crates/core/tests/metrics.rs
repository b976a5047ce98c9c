use msclab::metrics::*;
use proptest::prelude::*;

/// BLEU-4 straight from its definition, with n-grams as joined strings.
fn bleu_oracle(cand: &str, reference: &str) -> f64 {
    let c: Vec<&str> = cand.split(' ').filter(|s| !s.is_empty()).collect();
    let r: Vec<&str> = reference.split(' ').filter(|s| !s.is_empty()).collect();
    if c.is_empty() {
        return 0.0;
    }
    let grams = |t: &[&str], n: usize| -> Vec<String> {
        if t.len() < n {
            return vec![];
        }
        (0..=t.len() - n).map(|i| t[i..i + n].join(" ")).collect()
    };
    let mut product = 1.0f64;
    for n in 1..=4 {
        let cg = grams(&c, n);
        let mut rg = grams(&r, n);
        let mut hits = 0;
        for g in &cg {
            if let Some(pos) = rg.iter().position(|x| x == g) {
                rg.remove(pos);
                hits += 1;
            }
        }
        let p = if hits > 0 {
            hits as f64 / cg.len() as f64
        } else if n == 1 {
            0.0
        } else {
            1.0 / (cg.len() as f64 + 1.0)
        };
        product *= p;
    }
    let bp = if c.len() > r.len() { 1.0 } else { (1.0 - r.len() as f64 / c.len() as f64).exp() };
    100.0 * bp * product.powf(0.25)
}

#[test]
fn two_token_example() {
    // unigram 1/2, bigram smoothed 1/2, orders 3 and 4 smoothed 1/1
    let expected = 100.0 * (0.5f64 * 0.5).powf(0.25);
    assert!((bleu("the cat", "the dog") - expected).abs() < 1e-12);
    assert!((bleu_oracle("the cat", "the dog") - expected).abs() < 1e-12);
}

#[test]
fn brevity_penalty_applies() {
    let b = bleu("a man rides", "a man rides a horse");
    assert!(b < 100.0 && (b - bleu_oracle("a man rides", "a man rides a horse")).abs() < 1e-9);
}

#[test]
fn score_row_strips_padding() {
    let row = ScoreRow::score(3, Stage::MscSld, "A dog runs.\0\0\0", "A dog runs.", 1.5);
    assert!(!row.bler_error);
    assert_eq!((row.bleu, row.rouge_l), (100.0, 100.0));
    let row = ScoreRow::score(3, Stage::Msc, "A dog ruXs.", "A dog runs.", 1.5);
    assert!(row.bler_error && row.bleu < 100.0);
}

#[test]
fn stage_labels() {
    assert_eq!(serde_json::to_string(&Stage::Sharq).unwrap(), "\"msc-sld-sharq\"");
    assert_eq!(Stage::MscSec.to_string(), "msc-sec");
}

fn sentence() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!["a", "man", "dog", "runs", "the", "red", "bike", "on"]), 1..10)
        .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn bleu_matches_definition(c in sentence(), r in sentence()) {
        prop_assert!((bleu(&c, &r) - bleu_oracle(&c, &r)).abs() < 1e-9);
    }

    #[test]
    fn scores_bounded_and_perfect_only_on_match(c in sentence(), r in sentence()) {
        let b = bleu(&c, &r);
        let l = rouge_l(&c, &r);
        prop_assert!((0.0..=100.0).contains(&b) && (0.0..=100.0).contains(&l));
        if c == r {
            prop_assert_eq!(b, 100.0);
            prop_assert_eq!(l, 100.0);
        } else {
            prop_assert!(l < 100.0);
        }
    }

    #[test]
    fn padding_invariance(c in sentence(), r in sentence(), pad in 0usize..6) {
        let padded = format!("{c}{}", "\0".repeat(pad));
        prop_assert_eq!(bleu(&padded, &r), bleu(&c, &r));
        prop_assert_eq!(rouge_l(&padded, &r), rouge_l(&c, &r));
    }

    #[test]
    fn wilson_contains_the_rate(k in 0usize..500, extra in 0usize..500) {
        let p = wilson_interval(k, k + extra + 1);
        prop_assert!(p.ci_lo <= p.rate && p.rate <= p.ci_hi);
    }
}
