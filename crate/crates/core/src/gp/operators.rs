use rand::Rng;

use super::generate::full_tree;
use super::{GpConfig, Individual};

/// Index of the tournament winner: `k` draws with replacement, lowest
/// fitness wins, ties go to the lower population index.
pub fn tournament_index<R: Rng + ?Sized>(pop: &[Individual], k: usize, rng: &mut R) -> usize {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..k {
        let i = rng.gen_range(0..pop.len());
        match pop[i].score().total_cmp(&pop[best].score()) {
            std::cmp::Ordering::Less => best = i,
            std::cmp::Ordering::Equal if i < best => best = i,
            _ => {}
        }
    }
    best
}

pub fn tournament_select<'a, R: Rng + ?Sized>(pop: &'a [Individual], k: usize, rng: &mut R) -> &'a Individual {
    &pop[tournament_index(pop, k, rng)]
}

/// Subtree crossover. Each offspring that breaks the size limits is replaced
/// by its own parent.
pub fn crossover<R: Rng + ?Sized>(
    config: &GpConfig,
    a: &Individual,
    b: &Individual,
    rng: &mut R,
) -> (Individual, Individual) {
    let i = rng.gen_range(0..a.tree.len());
    let j = rng.gen_range(0..b.tree.len());
    let sa = a.tree.subtree(i).expect("index within tree").clone();
    let sb = b.tree.subtree(j).expect("index within tree").clone();
    let ca = a.tree.with_subtree(i, sb).expect("index within tree");
    let cb = b.tree.with_subtree(j, sa).expect("index within tree");
    (offspring(config, a, ca), offspring(config, b, cb))
}

/// Replaces a uniformly chosen subtree with a fresh Full subtree of random depth.
pub fn mutate<R: Rng + ?Sized>(config: &GpConfig, n_vars: usize, a: &Individual, rng: &mut R) -> Individual {
    let i = rng.gen_range(0..a.tree.len());
    let d = rng.gen_range(config.min_subtree_depth..=config.max_subtree_depth);
    let fresh = full_tree(d, n_vars, config.constant_range, rng);
    offspring(config, a, a.tree.with_subtree(i, fresh).expect("index within tree"))
}

fn offspring(config: &GpConfig, parent: &Individual, tree: crate::expr::Expr) -> Individual {
    if !config.within_limits(&tree) || tree == parent.tree {
        parent.clone()
    } else {
        Individual::new(tree)
    }
}
