//! Quick oracle checks against plaintext references.

use std::time::Instant;

use anyhow::Result;
use ppsr::bench::{generate_dataset, run_experiment, vertical_split, Benchmark, ExperimentConfig, Mode};
use ppsr::expr::{equivalent, parse};
use ppsr::gp::{fitness_mse, full_tree, GpConfig};
use ppsr::kernels::{sec_exp, sec_log, sec_reciprocal, sec_sincos, KernelConfig};
use ppsr::mpc::eval_shared;
use ppsr::protocol::{eval_rounds, run_secure_gp, secure_fitness_evaluation, SessionConfig};
use ppsr::ring::{FixedCodec, Ring};
use ppsr::sharing::{beaver_mul, reconstruct, share, Dealer, TripleLedger};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Checks {
    failed: usize,
}

impl Checks {
    /// `known` marks a limitation documented in the README; it is reported
    /// but does not change the exit status.
    fn report(&mut self, name: &str, ok: bool, known: bool, detail: String) {
        let tag = match (ok, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        if !ok && !known {
            self.failed += 1;
        }
        println!("{tag:<12} {name}: {detail}");
    }
}

fn worst(got: &[f64], xs: &[f64], f: impl Fn(f64) -> f64, relative: bool) -> f64 {
    got.iter()
        .zip(xs)
        .map(|(g, &x)| {
            let w = f(x);
            if relative { ((g - w) / w).abs() } else { (g - w).abs() }
        })
        .fold(0.0, f64::max)
}

pub fn run(full: bool) -> Result<bool> {
    let mut c = Checks { failed: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let codec = FixedCodec::default();
    let k = KernelConfig::default();

    let ring = Ring::default();
    let mut dealer = Dealer::new(ring, 1);
    let mut ledger = TripleLedger::new();
    let mut bad = 0;
    for t in dealer.deal(10_000) {
        let (x, y) = (ring.random(&mut rng), ring.random(&mut rng));
        let z = beaver_mul(&ring, share(&ring, x, &mut rng), share(&ring, y, &mut rng), &t, &mut ledger)?;
        bad += (reconstruct(&ring, z.0, z.1)?.0 != x.0.wrapping_mul(y.0)) as usize;
    }
    c.report("beaver exactness", bad == 0, false, format!("{bad} of 10000 products wrong"));

    let lim = 100i64 << codec.frac_bits();
    let pairs: Vec<f64> = (0..20_000).map(|_| rng.gen_range(-lim..=lim) as f64 * codec.ulp()).collect();
    let (out, _) = eval_shared(codec, 2, &pairs, |ctx, v| {
        let a: Vec<_> = v.iter().step_by(2).copied().collect();
        let b: Vec<_> = v.iter().skip(1).step_by(2).copied().collect();
        let p = ctx.mul_products(&[(&a, &b)])?;
        Ok(ctx.truncate(&p[0]))
    })?;
    let bound = 2.0 * codec.ulp();
    let outliers = out.iter().zip(pairs.chunks(2)).filter(|(g, p)| (*g - p[0] * p[1]).abs() > bound).count();
    c.report("fixed-point products", outliers == 0, false, format!("{outliers} of 10000 beyond 2^-(B-1)"));

    let pi = std::f64::consts::PI;
    let xs: Vec<f64> = (0..1000).map(|i| -pi + 2.0 * pi * i as f64 / 999.0).collect();
    let (both, _) = eval_shared(codec, 3, &xs, |ctx, x| {
        let (cos, sin) = sec_sincos(ctx, &k, x)?;
        Ok(sin.into_iter().chain(cos).collect())
    })?;
    let (s, co) = both.split_at(xs.len());
    let e = worst(s, &xs, f64::sin, false).max(worst(co, &xs, f64::cos, false));
    c.report("sin/cos on [-pi, pi]", e <= 1e-3, false, format!("max error {e:.2e}"));

    let xs: Vec<f64> = (0..1000).map(|i| -8.0 + 16.0 * i as f64 / 999.0).collect();
    let (v, _) = eval_shared(codec, 4, &xs, |ctx, x| sec_exp(ctx, &k, x))?;
    let e = worst(&v, &xs, f64::exp, true);
    c.report("exp on [-8, 8]", e <= 1e-2, true, format!("max relative error {e:.2e}"));

    let xs: Vec<f64> = (0..1000).map(|i| 0.1 + 99.9 * i as f64 / 999.0).collect();
    let (v, _) = eval_shared(codec, 5, &xs, |ctx, x| sec_reciprocal(ctx, &k, x))?;
    let e = worst(&v, &xs, f64::recip, true);
    c.report("reciprocal on [0.1, 100]", e <= 1e-2, false, format!("max relative error {e:.2e}"));
    let (v, _) = eval_shared(codec, 6, &xs, |ctx, x| sec_log(ctx, &k, x))?;
    let e = worst(&v, &xs, f64::ln, false);
    c.report("log on [0.1, 100]", e <= 1e-2, false, format!("max error {e:.2e}"));

    let start = Instant::now();
    for b in [Benchmark::Nguyen9, Benchmark::Nguyen10, Benchmark::Nguyen12] {
        let spec = b.spec();
        let (train, _) = generate_dataset(&spec, 1);
        let clients = vertical_split(&train, &spec.assignment)?;
        let trees: Vec<_> = (0..100).map(|_| full_tree(rng.gen_range(1..=6), spec.n_vars, (-1.0, 1.0), &mut rng)).collect();
        let session = SessionConfig::default();
        let out = secure_fitness_evaluation(&session, &clients, &trees)?;
        let mut bad = 0;
        let mut distinct = std::collections::HashSet::new();
        let mut rounds = 0;
        for (t, z) in trees.iter().zip(&out.value) {
            let p = fitness_mse(t, &train)?;
            bad += ((z - p).abs() > 1e-2f64.max(1e-2 * p)) as usize;
            if distinct.insert(t.to_string()) {
                rounds += eval_rounds(&session.kernels, t) + 1;
            }
        }
        c.report(&format!("secure fitness {b}"), bad == 0, false, format!("{bad} of 100 trees outside budget"));
        let got = out.compute[0].stats.rounds;
        c.report(&format!("opening rounds {b}"), got == rounds, false, format!("{got} observed, {rounds} expected"));
    }
    println!("{:<12} secure fitness took {:.1}s", "", start.elapsed().as_secs_f64());

    let truth = Benchmark::Nguyen9.spec().ground_truth;
    for (text, want) in [
        ("(+ (sin x1) (* x2 x2))", false),
        ("(+ (sin x1) (* x2 (sin x2)))", false),
        ("(+ (sin x2) (sin (* x2 x1)))", false),
        ("(+ (sin (* x2 x2)) (sin x1))", true),
    ] {
        let got = equivalent(&parse(text)?, &truth, 2);
        c.report("equivalence", got == want, false, format!("{text} vs Nguyen-9 -> {got}"));
    }
    let got = equivalent(&parse("(* (* 2 (sin x1)) (cos x2))")?, &parse("(+ (sin (+ x1 x2)) (sin (- x1 x2)))")?, 2);
    c.report("equivalence", got, false, format!("product-to-sum identity -> {got}"));

    if full {
        let n10 = run_experiment(&ExperimentConfig::new(Benchmark::Nguyen10, Mode::Plaintext, 20, 0))?;
        c.report(
            "nguyen10 recovery",
            n10.recovery_rate() >= 0.3,
            false,
            format!("{}/20 runs recovered", n10.recovered()),
        );
        let spec = Benchmark::Nguyen9.spec();
        let (train, _) = generate_dataset(&spec, 6);
        let gp = GpConfig { population_size: 128, max_generations: 15, rng_seed: 6, ..GpConfig::default() };
        let out = run_secure_gp(&SessionConfig::seeded(6), &gp, &vertical_split(&train, &spec.assignment)?)?;
        let best = out.value.best.score();
        c.report("secure nguyen9", best <= 0.05, false, format!("best {} MSE {best:.3e}", out.value.best.tree));
    }

    println!("{} unexpected failures", c.failed);
    Ok(c.failed == 0)
}
