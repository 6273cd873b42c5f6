use std::collections::HashSet;
use std::thread;

use ppsr::bench::{generate_dataset, vertical_split, Benchmark, ClientDataset};
use ppsr::expr::{parse, Expr};
use ppsr::gp::{evolve, fitness_mse, full_tree, Dataset, FitnessOracle, GpConfig, PlainOracle};
use ppsr::mpc::MpcError;
use ppsr::protocol::{
    eval_rounds, inproc_mesh, run_client, run_secure_gp, run_session, secret_data_sharing, secure_fitness_evaluation,
    PartyRole, Payload, ProtocolError, SessionConfig, TransportKind,
};
use ppsr::ring::{FixedCodec, RingElement};
use ppsr::sharing::{PartyIndex, SharedMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nguyen9(seed: u64) -> (Dataset, Vec<ClientDataset>) {
    let spec = Benchmark::Nguyen9.spec();
    let (train, _) = generate_dataset(&spec, seed);
    let clients = vertical_split(&train, &spec.assignment).unwrap();
    (train, clients)
}

fn random_trees(count: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let d = rng.gen_range(1..=6);
            full_tree(d, 2, (-1.0, 1.0), &mut rng)
        })
        .collect()
}

#[test]
fn shared_dataset_reconstructs_exactly() {
    let codec = FixedCodec::default();
    let (train, clients) = nguyen9(3);
    let roles = [PartyRole::P0, PartyRole::P1, PartyRole::Client(1), PartyRole::Client(2), PartyRole::P3];
    let mut eps = inproc_mesh(&roles, 1);
    let _p3 = eps.pop().unwrap();
    let c2 = eps.pop().unwrap();
    let c1 = eps.pop().unwrap();
    let mut p1 = eps.pop().unwrap();
    let mut p0 = eps.pop().unwrap();
    let (a, b) = (clients[0].clone(), clients[1].clone());
    let h1 = thread::spawn(move || run_client(c1, codec, &a, 11));
    let h2 = thread::spawn(move || run_client(c2, codec, &b, 12));
    let (x0, y0) = secret_data_sharing(&mut p0, PartyIndex::P0, 2).unwrap();
    let (x1, y1) = secret_data_sharing(&mut p1, PartyIndex::P1, 2).unwrap();
    h1.join().unwrap().unwrap();
    h2.join().unwrap().unwrap();
    assert_eq!((x0.rows, x0.cols), (20, 2));
    let ring = codec.ring();
    let joint = SharedMatrix::reconstruct(ring, &x0, &x1).unwrap();
    let expect: Vec<RingElement> = train.x().iter().flatten().map(|&v| codec.encode(v).unwrap()).collect();
    assert_eq!(joint, expect);
    let y: Vec<RingElement> = y0.iter().zip(&y1).map(|(&u, &v)| ring.add(u, v)).collect();
    let expect_y: Vec<RingElement> = train.y().iter().map(|&v| codec.encode(v).unwrap()).collect();
    assert_eq!(y, expect_y);
}

#[test]
fn clients_must_agree_on_rows() {
    let (_, mut clients) = nguyen9(4);
    clients[0].x.pop();
    let r = secure_fitness_evaluation(&SessionConfig::default(), &clients, &[Expr::Var(1)]);
    assert!(matches!(r, Err(ProtocolError::DimensionMismatch(_))), "{r:?}");
}

#[test]
fn fitness_examples() {
    let (train, clients) = nguyen9(5);
    let truth = Benchmark::Nguyen9.spec().ground_truth;
    let out = secure_fitness_evaluation(&SessionConfig::default(), &clients, &[truth, Expr::Const(0.0)]).unwrap();
    assert!(out.value[0].abs() <= 1e-3, "{}", out.value[0]);
    let plain0 = fitness_mse(&Expr::Const(0.0), &train).unwrap();
    assert!((out.value[1] - plain0).abs() <= 1e-3);
    assert!((out.sst_over_m - train.sst_over_m()).abs() < 1e-15);

    let mut ones = clients.clone();
    ones[1].y = Some(vec![1.0; 20]);
    let out = secure_fitness_evaluation(&SessionConfig::default(), &ones, &[Expr::Const(0.0)]).unwrap();
    assert!((out.value[0] - 1.0).abs() <= 1e-3, "{}", out.value[0]);
}

#[test]
fn secure_fitness_tracks_plaintext_on_random_trees() {
    let (train, clients) = nguyen9(6);
    let trees = random_trees(100, 6);
    let out = secure_fitness_evaluation(&SessionConfig::default(), &clients, &trees).unwrap();
    for (t, z) in trees.iter().zip(&out.value) {
        let p = fitness_mse(t, &train).unwrap();
        assert!((z - p).abs() <= 1e-2f64.max(1e-2 * p), "{t}: secure {z} plain {p}");
    }
}

#[test]
fn rounds_match_multiplication_count() {
    let (_, clients) = nguyen9(7);
    let trees = random_trees(20, 7);
    let session = SessionConfig::default();
    let out = secure_fitness_evaluation(&session, &clients, &trees).unwrap();
    let distinct: HashSet<String> = trees.iter().map(|t| t.to_string()).collect();
    let expect: u64 = distinct.iter().map(|t| eval_rounds(&session.kernels, &parse(t).unwrap()) + 1).sum();
    assert_eq!(out.compute[0].stats.rounds, expect);
    assert_eq!(out.compute[1].stats.rounds, expect);
    assert!(out.triples_dealt >= out.compute[0].stats.triples_used);
}

#[test]
fn tcp_and_inproc_agree_bit_for_bit() {
    let (_, clients) = nguyen9(8);
    let trees = random_trees(10, 8);
    let inproc = secure_fitness_evaluation(&SessionConfig::default(), &clients, &trees).unwrap();
    let tcp_cfg = SessionConfig { transport: TransportKind::Tcp, ..SessionConfig::default() };
    let tcp = secure_fitness_evaluation(&tcp_cfg, &clients, &trees).unwrap();
    assert_eq!(inproc.value, tcp.value);
    assert_eq!(inproc.compute, tcp.compute);
}

#[test]
fn triple_exhaustion_aborts_cleanly() {
    let (_, clients) = nguyen9(9);
    let gp = GpConfig { population_size: 16, max_generations: 5, ..GpConfig::default() };
    for transport in [TransportKind::Inproc, TransportKind::Tcp] {
        let session = SessionConfig { triple_budget: Some(500), triple_batch: 64, transport, ..SessionConfig::default() };
        let r = run_secure_gp(&session, &gp, &clients);
        assert!(matches!(r, Err(ProtocolError::Mpc(MpcError::TripleExhaustion))), "{transport:?}: {r:?}");
    }
}

fn encoded_data(codec: &FixedCodec, data: &Dataset) -> HashSet<u64> {
    data.x().iter().flatten().chain(data.y()).map(|&v| codec.encode(v).unwrap().0).collect()
}

#[test]
fn audit_logs_hold_no_plaintext() {
    let (train, clients) = nguyen9(10);
    let codec = FixedCodec::default();
    let raw = encoded_data(&codec, &train);
    let raw_f64: HashSet<u64> = train.x().iter().flatten().chain(train.y()).map(|v| v.to_bits()).collect();
    let session = SessionConfig { audit: true, ..SessionConfig::default() };
    let gp = GpConfig { population_size: 20, max_generations: 3, ..GpConfig::default() };
    let out = run_secure_gp(&session, &gp, &clients).unwrap();
    let audit = out.audit.unwrap();
    for role in [PartyRole::P0, PartyRole::P1, PartyRole::P3] {
        assert!(!audit.inbox(role).is_empty());
        for m in audit.inbox(role) {
            assert!(m.payload.ring_elements().iter().all(|e| !raw.contains(&e.0)), "{role} got a raw value");
            if let Payload::EvalRequest { expressions, .. } = &m.payload {
                assert!(expressions.iter().all(|e| parse(e).is_ok()));
            }
        }
    }
    for m in audit.inbox(PartyRole::P3) {
        match &m.payload {
            Payload::FitnessShare { .. } | Payload::Control(_) => {}
            Payload::PublicStat { sst_over_m } => assert!(!raw_f64.contains(&sst_over_m.to_bits())),
            other => panic!("P3 received {}", other.name()),
        }
    }
    for m in audit.inbox(PartyRole::P0).iter().chain(audit.inbox(PartyRole::P1)) {
        assert!(
            matches!(
                m.payload,
                Payload::ShareUpload { .. }
                    | Payload::TripleBatch(_)
                    | Payload::BeaverOpen(_)
                    | Payload::EvalRequest { .. }
                    | Payload::Control(_)
            ),
            "{}",
            m.payload.name()
        );
    }
}

fn uploads(audit: &ppsr::protocol::Audit, role: PartyRole) -> Vec<Vec<RingElement>> {
    audit
        .inbox(role)
        .iter()
        .filter_map(|m| match &m.payload {
            Payload::ShareUpload { x, y, .. } => Some(x.iter().chain(y.iter().flatten()).copied().collect()),
            _ => None,
        })
        .collect()
}

#[test]
fn client_shares_to_one_party_do_not_depend_on_data() {
    let codec = FixedCodec::default();
    let ring = *codec.ring();
    let session = SessionConfig { audit: true, ..SessionConfig::default() };
    let (d1, c1) = nguyen9(11);
    let (d2, c2) = nguyen9(12);
    assert_ne!(d1, d2);
    let trees = [Expr::Var(1)];
    let a = secure_fitness_evaluation(&session, &c1, &trees).unwrap().audit.unwrap();
    let b = secure_fitness_evaluation(&session, &c2, &trees).unwrap().audit.unwrap();
    assert_eq!(uploads(&a, PartyRole::P0), uploads(&b, PartyRole::P0));
    // P1's shares differ exactly by the difference of the encoded data.
    let (u1, u2) = (uploads(&a, PartyRole::P1), uploads(&b, PartyRole::P1));
    let plain = |c: &[ClientDataset]| -> Vec<Vec<RingElement>> {
        c.iter()
            .map(|c| c.x.iter().flatten().chain(c.y.iter().flatten()).map(|&v| codec.encode(v).unwrap()).collect())
            .collect()
    };
    let (p1, p2) = (plain(&c1), plain(&c2));
    for j in 0..2 {
        for k in 0..u1[j].len() {
            assert_eq!(ring.sub(u1[j][k], u2[j][k]), ring.sub(p1[j][k], p2[j][k]));
        }
    }
}

/// Records every batch the wrapped oracle scores.
struct Recording<O> {
    inner: O,
    batches: Vec<Vec<(String, f64)>>,
}

impl<O: FitnessOracle> FitnessOracle for Recording<O> {
    type Error = O::Error;

    fn evaluate(&mut self, trees: &[&Expr]) -> Result<Vec<f64>, O::Error> {
        let z = self.inner.evaluate(trees)?;
        self.batches.push(trees.iter().map(|t| t.to_string()).zip(z.iter().copied()).collect());
        Ok(z)
    }
}

#[test]
fn secure_and_plaintext_trajectories_agree_while_rankings_agree() {
    for seed in 0..6 {
        let (train, clients) = nguyen9(20 + seed);
        let gp = GpConfig { population_size: 24, max_generations: 6, rng_seed: seed, ..GpConfig::default() };
        let session = SessionConfig::seeded(seed);
        let secure = run_session(&session, Some(&gp), &clients, |oracle| {
            let mut rec = Recording { inner: oracle, batches: Vec::new() };
            let run = evolve(&gp, 2, &mut rec).map_err(|e| e.into_oracle().unwrap())?;
            Ok((run, rec.batches))
        })
        .unwrap()
        .value;
        let mut plain = Recording { inner: PlainOracle { data: &train }, batches: Vec::new() };
        let plain_run = evolve(&gp, 2, &mut plain).unwrap();

        // Scores seen so far as (text, plaintext, secure). Pairs with equal
        // text cannot steer the trajectory whichever one wins.
        let mut seen: Vec<(String, f64, f64)> = Vec::new();
        let mut consistent = true;
        for (g, batch) in secure.1.iter().enumerate() {
            let texts = |b: &[(String, f64)]| b.iter().map(|e| e.0.clone()).collect::<Vec<_>>();
            assert_eq!(texts(batch), texts(&plain.batches[g]), "seed {seed}: generation {g} diverged early");
            for (text, z) in batch {
                let p = fitness_mse(&parse(text).unwrap(), &train).unwrap_or(f64::INFINITY);
                seen.push((text.clone(), p, *z));
            }
            consistent = seen.iter().all(|a| seen.iter().all(|b| a.0 == b.0 || (a.1 < b.1) == (a.2 < b.2)));
            if !consistent {
                break;
            }
        }
        if consistent {
            assert_eq!(secure.0.best.tree, plain_run.best.tree);
        }
    }
}
