use absa_kit::eval::Counts;
use absa_kit::seed;
use absa_kit::{score_task, CategoryLabel, Element, MatchOptions, Polarity, TaskKind, Term, Tuple};
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn key(t: &Tuple, ci: bool) -> String {
    let term = |x: &Option<Term>| match x {
        None => "-".to_string(),
        Some(Term::Implicit) => "<implicit>".to_string(),
        Some(Term::Explicit(s)) if ci => s.trim().to_lowercase(),
        Some(Term::Explicit(s)) => s.trim().to_string(),
    };
    format!(
        "{}|{}|{}|{:?}",
        term(&t.aspect),
        t.category.as_ref().map_or("-", |c| c.canonical()),
        term(&t.opinion),
        t.polarity
    )
}

fn dedup(keys: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for k in keys {
        let mut seen = false;
        for o in &out {
            if *o == k {
                seen = true;
            }
        }
        if !seen {
            out.push(k);
        }
    }
    out
}

/// Nested-loop count of (tp, #pred, #gold).
fn brute(preds: &[Vec<Tuple>], golds: &[Vec<Tuple>], ci: bool) -> (usize, usize, usize) {
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for i in 0..preds.len() {
        let p = dedup(preds[i].iter().map(|t| key(t, ci)).collect());
        let g = dedup(golds[i].iter().map(|t| key(t, ci)).collect());
        np += p.len();
        ng += g.len();
        for a in &p {
            for b in &g {
                if a == b {
                    tp += 1;
                }
            }
        }
    }
    (tp, np, ng)
}

fn random_term(rng: &mut ChaCha8Rng) -> Term {
    let words = ["pizza", "Pizza", " pizza ", "staff", "battery", "screen"];
    if rng.random_bool(0.2) {
        Term::Implicit
    } else {
        Term::explicit(*words.choose(rng).unwrap())
    }
}

fn random_tuple(task: TaskKind, rng: &mut ChaCha8Rng) -> Tuple {
    let sig = task.signature();
    let cats = ["FOOD#QUALITY", "SERVICE#GENERAL"];
    Tuple {
        aspect: sig.contains(Element::Aspect).then(|| random_term(rng)),
        category: sig
            .contains(Element::Category)
            .then(|| CategoryLabel::new(*cats.choose(rng).unwrap())),
        opinion: sig.contains(Element::Opinion).then(|| random_term(rng)),
        polarity: sig
            .contains(Element::Sentiment)
            .then(|| *Polarity::ALL.choose(rng).unwrap()),
    }
}

fn random_set(task: TaskKind, rng: &mut ChaCha8Rng) -> Vec<Tuple> {
    let n = rng.random_range(0..5);
    (0..n).map(|_| random_tuple(task, rng)).collect()
}

#[test]
fn matches_brute_force_on_random_corpora() {
    for task in TaskKind::ALL {
        let mut rng = seed::rng(seed::derive_seed(7, task.name()));
        let preds: Vec<Vec<Tuple>> = (0..1200).map(|_| random_set(task, &mut rng)).collect();
        let golds: Vec<Vec<Tuple>> = (0..1200).map(|_| random_set(task, &mut rng)).collect();
        for ci in [false, true] {
            let m = score_task(
                &preds,
                &golds,
                MatchOptions {
                    case_insensitive: ci,
                },
            )
            .unwrap();
            let (tp, np, ng) = brute(&preds, &golds, ci);
            assert_eq!((m.tp, m.n_pred, m.n_gold), (tp, np, ng), "{task}");
            let p = if np == 0 { 0.0 } else { tp as f64 / np as f64 };
            let r = if ng == 0 { 0.0 } else { tp as f64 / ng as f64 };
            let f = if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            };
            assert!((m.precision - p).abs() < 1e-12);
            assert!((m.recall - r).abs() < 1e-12);
            assert!((m.f1 - f).abs() < 1e-12);
        }
    }
}

#[test]
fn hand_computed_corpus() {
    let t = |a: &str, o: &str| Tuple {
        aspect: Some(Term::explicit(a)),
        opinion: Some(Term::explicit(o)),
        ..Tuple::default()
    };
    // 2 of 3 predictions correct, 2 of 4 gold found
    let preds = vec![vec![t("a", "x"), t("b", "y")], vec![t("c", "z")]];
    let golds = vec![
        vec![t("a", "x"), t("d", "w")],
        vec![t("b", "y"), t("c", "z")],
    ];
    let m = score_task(&preds, &golds, MatchOptions::default()).unwrap();
    assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
    assert!((m.recall - 0.5).abs() < 1e-12);
    assert!((m.f1 - 4.0 / 7.0).abs() < 1e-12);
}

#[test]
fn empty_denominators_score_zero() {
    let none: Vec<Vec<Tuple>> = vec![vec![], vec![]];
    let m = score_task(&none, &none, MatchOptions::default()).unwrap();
    assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    assert!(score_task(&none[..1], &none, MatchOptions::default()).is_err());
}

fn arb_corpus() -> impl Strategy<Value = (TaskKind, u64)> {
    (prop::sample::select(TaskKind::ALL.to_vec()), any::<u64>())
}

fn corpus(task: TaskKind, s: u64) -> (Vec<Vec<Tuple>>, Vec<Vec<Tuple>>) {
    let mut rng = seed::rng(s);
    let n = rng.random_range(1..30);
    let preds = (0..n).map(|_| random_set(task, &mut rng)).collect();
    let golds = (0..n).map(|_| random_set(task, &mut rng)).collect();
    (preds, golds)
}

proptest! {
    #[test]
    fn permutations_do_not_change_scores((task, s) in arb_corpus()) {
        let (preds, golds) = corpus(task, s);
        let base = score_task(&preds, &golds, MatchOptions::default()).unwrap();
        let mut rng = seed::rng(s ^ 1);
        let mut order: Vec<usize> = (0..preds.len()).collect();
        order.shuffle(&mut rng);
        let shuffle_inner = |v: &Vec<Tuple>, rng: &mut ChaCha8Rng| {
            let mut v = v.clone();
            v.shuffle(rng);
            v
        };
        let p2: Vec<_> = order.iter().map(|&i| shuffle_inner(&preds[i], &mut rng)).collect();
        let g2: Vec<_> = order.iter().map(|&i| shuffle_inner(&golds[i], &mut rng)).collect();
        prop_assert_eq!(score_task(&p2, &g2, MatchOptions::default()).unwrap(), base);
    }

    #[test]
    fn adding_a_gold_tuple_to_predictions_never_hurts_recall((task, s) in arb_corpus()) {
        let (mut preds, golds) = corpus(task, s);
        let before = score_task(&preds, &golds, MatchOptions::default()).unwrap();
        if let Some((i, g)) = golds.iter().enumerate().find_map(|(i, g)| g.first().map(|t| (i, t.clone()))) {
            preds[i].push(g);
            let after = score_task(&preds, &golds, MatchOptions::default()).unwrap();
            prop_assert!(after.tp >= before.tp);
            prop_assert!(after.recall >= before.recall);
        }
    }

    #[test]
    fn removing_a_wrong_prediction_never_hurts_precision((task, s) in arb_corpus()) {
        let (mut preds, golds) = corpus(task, s);
        let before = score_task(&preds, &golds, MatchOptions::default()).unwrap();
        let wrong = preds.iter().enumerate().find_map(|(i, p)| {
            let k = |t: &Tuple| key(t, false);
            p.iter()
                .position(|t| {
                    !golds[i].iter().any(|g| k(g) == k(t)) && p.iter().filter(|u| k(u) == k(t)).count() == 1
                })
                .map(|j| (i, j))
        });
        if let Some((i, j)) = wrong {
            preds[i].remove(j);
            let after = score_task(&preds, &golds, MatchOptions::default()).unwrap();
            prop_assert_eq!(after.tp, before.tp);
            prop_assert!(after.precision >= before.precision);
        }
    }

    #[test]
    fn instance_counts_add_up((task, s) in arb_corpus()) {
        let (preds, golds) = corpus(task, s);
        let mut total = Counts::default();
        for (p, g) in preds.iter().zip(&golds) {
            total += Counts::of_instance(p, g, MatchOptions::default());
        }
        let m = score_task(&preds, &golds, MatchOptions::default()).unwrap();
        prop_assert_eq!((total.tp, total.n_pred, total.n_gold), (m.tp, m.n_pred, m.n_gold));
    }
}
