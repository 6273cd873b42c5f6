use ppsr::expr::{equivalent, format_constant, parse, simplify, Expr};
use ppsr::gp::full_tree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(count: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let d = rng.gen_range(0..=5);
            full_tree(d, 3, (-1.0, 1.0), &mut rng)
        })
        .collect()
}

fn nine_digits(e: &Expr) -> Expr {
    e.map_constants(&|c| format_constant(c).parse().unwrap())
}

#[test]
fn parse_format_round_trip() {
    for t in corpus(10_000, 1) {
        let canonical = nine_digits(&t);
        let text = canonical.to_string();
        let back = parse(&text).unwrap();
        assert_eq!(back, canonical, "{text}");
        assert_eq!(back.to_string(), text);
        let spaced = text.replace(' ', "  \n ").replace('(', "( ");
        assert_eq!(parse(&spaced).unwrap().to_string(), text);
    }
}

#[test]
fn simplify_preserves_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in corpus(10_000, 2) {
        let s = simplify(&t);
        assert!(s.len() <= t.len());
        for _ in 0..4 {
            let row: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = (t.eval(&row), s.eval(&row));
            assert!((a - b).abs() <= 1e-9, "{t} -> {s}: {a} vs {b}");
        }
        assert_eq!(simplify(&s), s, "simplify is idempotent on {t}");
    }
}

#[test]
fn equivalence_is_reflexive_and_symmetric() {
    let trees = corpus(300, 3);
    for t in &trees {
        assert!(equivalent(t, t, 3));
    }
    for pair in trees.chunks(2) {
        let (f, g) = (&pair[0], &pair[1]);
        assert_eq!(equivalent(f, g, 3), equivalent(g, f, 3), "{f} vs {g}");
        let rewritten = Expr::add(simplify(f), Expr::Const(0.0));
        assert!(equivalent(f, &rewritten, 3));
    }
}

#[test]
fn equivalence_matches_dense_sampling() {
    // An independent check on a fine grid over [-1,1]^2.
    let cases = [
        ("(* (* 2 (sin x1)) (cos x2))", "(+ (sin (+ x1 x2)) (sin (- x1 x2)))"),
        ("(* (sin x1) (sin x1))", "(- 1 (* (cos x1) (cos x1)))"),
        ("(+ (sin x1) x2)", "(+ (sin x1) (sin x2))"),
        ("(* x1 (+ x2 1))", "(+ (* x1 x2) x1)"),
        ("(cos (- x1 x2))", "(cos (- x2 x1))"),
        ("(* x1 x1)", "(* x1 (* x1 1.0001))"),
    ];
    for (a, b) in cases {
        let (f, g) = (parse(a).unwrap(), parse(b).unwrap());
        let mut dense = true;
        for i in 0..=100 {
            for j in 0..=100 {
                let row = [-1.0 + 0.02 * i as f64, -1.0 + 0.02 * j as f64];
                let (u, v) = (f.eval(&row), g.eval(&row));
                dense &= (u - v).abs() <= 1e-9 * (1.0 + u.abs());
            }
        }
        assert_eq!(equivalent(&f, &g, 2), dense, "{a} vs {b}");
    }
}
