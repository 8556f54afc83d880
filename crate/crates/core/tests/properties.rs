use phonosim_core::g2p::{G2pRule, Ruleset, UnmatchedMode};
use phonosim_core::ipa::{tokenize_ipa, NormalizationPolicy};
use phonosim_core::per::{corpus_per, edit_distance, per, Averaging};
use phonosim_core::projection::pca_project;
use phonosim_core::stats::{similarity_matrix, PhonemeDistribution};
use proptest::prelude::*;

fn segment_strategy() -> impl Strategy<Value = String> {
    let base = prop::sample::select(vec!["a", "e", "s", "z", "t", "ʃ", "k", "ɡ", "ŋ"]);
    let mark = prop::sample::select(vec!["ʲ", "ː", "\u{0303}", "\u{0324}", "ʰ"]);
    let prefix = prop::option::of(prop::sample::select(vec!["ˈ", "ˌ", "."]));
    let tied = prop::option::of(prop::sample::select(vec!["s", "ʃ", "p"]));
    (prefix, base, tied, prop::collection::vec(mark, 0..3)).prop_map(|(p, b, t, ms)| {
        let mut s = p.unwrap_or("").to_string();
        s.push_str(b);
        if let Some(t) = t {
            s.push('\u{0361}');
            s.push_str(t);
        }
        s.extend(ms);
        s
    })
}

fn ipa_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec((segment_strategy(), any::<bool>()), 0..12).prop_map(|segs| {
        segs.into_iter()
            .map(|(s, space)| if space { s + " " } else { s })
            .collect()
    })
}

fn dist(code: &str, p: Vec<f64>) -> PhonemeDistribution {
    PhonemeDistribution {
        language_code: code.into(),
        probabilities: p,
        total_count: 1,
    }
}

proptest! {
    #[test]
    fn tokenize_round_trips_through_display(s in ipa_strategy()) {
        let seq = tokenize_ipa(&s).unwrap();
        prop_assert_eq!(tokenize_ipa(&seq.to_string()).unwrap(), seq);
    }

    #[test]
    fn default_normalization_is_idempotent(s in ipa_strategy()) {
        let p = NormalizationPolicy::default();
        let once = p.normalize(&tokenize_ipa(&s).unwrap());
        prop_assert_eq!(p.normalize(&once), once.clone());
        let stripped = ['ˈ', 'ˌ', '.', '\u{0324}'];
        let clean = once.iter().all(|ph| !ph.as_str().contains(stripped));
        prop_assert!(clean, "marks survived in {}", once);
    }

    #[test]
    fn policy_file_round_trips(stress in any::<bool>(), voqs in any::<bool>(), strip in prop::sample::subsequence(vec!['ː', 'ʰ', '.', '\u{0303}'], 0..4)) {
        let p = NormalizationPolicy::new(stress, voqs, strip, [("sʲ".to_string(), "ʃ".to_string())]).unwrap();
        prop_assert_eq!(NormalizationPolicy::parse(&p.to_file_string()).unwrap(), p);
    }

    #[test]
    fn g2p_output_is_longest_match(text in "[abc ]{0,20}") {
        let rules = vec![
            G2pRule::new("a", "a"),
            G2pRule::new("b", "p"),
            G2pRule::new("c", "k"),
            G2pRule::new("ab", "ɓ"),
            G2pRule::new("abc", "t͡s"),
        ];
        let rs = Ruleset::new("x", rules, true, true).unwrap();
        let got = rs.transliterate(&text, &NormalizationPolicy::identity(), UnmatchedMode::Error).unwrap();
        // reference: greedy replacement, longest grapheme first
        let mut expect = Vec::new();
        for word in text.split_whitespace() {
            let mut rest = word;
            while !rest.is_empty() {
                let (g, o) = [("abc", "t͡s"), ("ab", "ɓ"), ("a", "a"), ("b", "p"), ("c", "k")]
                    .into_iter()
                    .find(|(g, _)| rest.starts_with(g))
                    .unwrap();
                expect.push(o.to_string());
                rest = &rest[g.len()..];
            }
        }
        let got: Vec<String> = got.iter().map(|p| p.as_str().to_string()).collect();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn similarity_scale_invariance(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..10.0, 5), 2..6),
        scales in prop::collection::vec(0.1f64..100.0, 6),
    ) {
        let a: Vec<_> = rows.iter().enumerate().map(|(i, r)| dist(&i.to_string(), r.clone())).collect();
        let b: Vec<_> = rows.iter().enumerate()
            .map(|(i, r)| dist(&i.to_string(), r.iter().map(|x| x * scales[i]).collect()))
            .collect();
        let (ma, mb) = (similarity_matrix(&a).unwrap(), similarity_matrix(&b).unwrap());
        for (ra, rb) in ma.values().iter().zip(mb.values()) {
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pca_translation_invariance(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 3..8),
        shift in prop::collection::vec(-100.0f64..100.0, 4),
    ) {
        let ids: Vec<String> = (0..rows.len()).map(|i| i.to_string()).collect();
        let moved: Vec<Vec<f64>> = rows.iter()
            .map(|r| r.iter().zip(&shift).map(|(x, s)| x + s).collect())
            .collect();
        let a = pca_project(&rows, &ids, 2).unwrap();
        let b = pca_project(&moved, &ids, 2).unwrap();
        let gap = a.explained_variance[0] - a.explained_variance[1];
        // component directions are only stable when eigenvalues are separated
        prop_assume!(gap > 1e-3 && a.explained_variance[1] > 1e-3);
        for (ca, cb) in a.coords.iter().zip(&b.coords) {
            for (x, y) in ca.iter().zip(cb) {
                prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn pca_is_deterministic(rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..8)) {
        let ids: Vec<String> = (0..rows.len()).map(|i| i.to_string()).collect();
        prop_assert_eq!(pca_project(&rows, &ids, 2).unwrap(), pca_project(&rows, &ids, 2).unwrap());
    }

    #[test]
    fn per_counts_sum_to_distance(a in prop::collection::vec(0u8..5, 1..10), b in prop::collection::vec(0u8..5, 0..10)) {
        let rep = per(&a, &b).unwrap();
        prop_assert_eq!(rep.errors(), edit_distance(&a, &b));
        prop_assert!(rep.deletions + rep.substitutions <= a.len());
        prop_assert_eq!(a.len() + rep.insertions, b.len() + rep.deletions);
    }

    #[test]
    fn micro_equals_macro_for_equal_lengths(pairs in prop::collection::vec((prop::collection::vec(0u8..4, 4), prop::collection::vec(0u8..4, 0..6)), 1..6)) {
        let micro = corpus_per(&pairs, Averaging::Micro).unwrap().per_percent;
        let mac = corpus_per(&pairs, Averaging::Macro).unwrap().per_percent;
        prop_assert!((micro - mac).abs() < 1e-9);
    }
}
