//! Seeded random objects for property suites and the eta search.

use rand::Rng;

use crate::game::{Game, GameSpec};

/// Symmetric Dirichlet(1) sample: normalized unit exponentials.
pub fn dirichlet<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Random game with Dirichlet(1) queries and a fair-coin predicate.
pub fn random_game<R: Rng + ?Sized>(
    query_sizes: &[usize],
    response_sizes: &[usize],
    rng: &mut R,
) -> Game {
    let nx: usize = query_sizes.iter().product();
    let nu: usize = response_sizes.iter().product();
    let mut query = dirichlet(nx, rng);
    let total: f64 = query.iter().sum();
    query.iter_mut().for_each(|q| *q /= total);
    let predicate = (0..nx * nu).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
    GameSpec {
        name: "random".into(),
        query_sizes: query_sizes.to_vec(),
        response_sizes: response_sizes.to_vec(),
        query,
        exact_query: None,
        predicate,
    }
    .validate()
    .expect("random games are valid")
}

/// Random game with `m` parties and alphabet sizes drawn from `1..=max_size`.
pub fn random_small_game<R: Rng + ?Sized>(m: usize, max_size: usize, rng: &mut R) -> Game {
    let q: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=max_size)).collect();
    let r: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=max_size)).collect();
    random_game(&q, &r, rng)
}
