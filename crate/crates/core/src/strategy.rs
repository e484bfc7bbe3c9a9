//! Strategy classes and membership checks.

use std::fmt;

use nlgame_lp::{solve, Comparator, LinearProgram, LpStatus};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, RepeatedGame};
use crate::sampling::dirichlet;
use crate::tensor::{AlphabetShape, AxisLabel, Channel, ChannelKind, Role};

pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Subset of the parties `{0, .., m-1}` as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct PartySet(u32);

impl PartySet {
    pub const EMPTY: PartySet = PartySet(0);

    pub fn from_members(members: &[usize]) -> Self {
        PartySet(members.iter().fold(0, |acc, &i| acc | (1 << i)))
    }

    pub fn full(m: usize) -> Self {
        PartySet((1u32 << m) - 1)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, party: usize) -> bool {
        self.0 >> party & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn members(self) -> Vec<usize> {
        (0..32).filter(|&i| self.contains(i)).collect()
    }

    pub fn complement(self, m: usize) -> Self {
        PartySet(!self.0 & Self::full(m).0)
    }
}

impl From<PartySet> for Vec<usize> {
    fn from(s: PartySet) -> Self {
        s.members()
    }
}

impl TryFrom<Vec<usize>> for PartySet {
    type Error = String;

    fn try_from(v: Vec<usize>) -> std::result::Result<Self, String> {
        if let Some(&bad) = v.iter().find(|&&i| i >= 32) {
            return Err(format!("party index {bad} out of range"));
        }
        Ok(PartySet::from_members(&v))
    }
}

impl fmt::Display for PartySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.members().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Nonempty proper subsets of `m` parties in increasing bitmask order.
pub fn proper_subsets(m: usize) -> Vec<PartySet> {
    (1..(1u32 << m) - 1).map(PartySet).collect()
}

fn party_labels(shape: &AlphabetShape, set: PartySet) -> Vec<AxisLabel> {
    set.members().iter().map(|&i| shape.labels()[i]).collect()
}

/// One response function per party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub maps: Vec<Vec<usize>>,
}

impl DeterministicStrategy {
    pub fn new(game: &Game, maps: Vec<Vec<usize>>) -> Result<Self> {
        let s = DeterministicStrategy { maps };
        s.check(game)?;
        Ok(s)
    }

    pub fn constant(game: &Game, letter: usize) -> Result<Self> {
        let maps = game.query_sizes().iter().map(|&s| vec![letter; s]).collect();
        Self::new(game, maps)
    }

    fn check(&self, game: &Game) -> Result<()> {
        if self.maps.len() != game.parties() {
            return Err(Error::ShapeMismatch(format!(
                "strategy for {} parties, game has {}",
                self.maps.len(),
                game.parties()
            )));
        }
        for (i, f) in self.maps.iter().enumerate() {
            if f.len() != game.query_sizes()[i] {
                return Err(Error::ShapeMismatch(format!(
                    "party {i} map covers {} of {} query letters",
                    f.len(),
                    game.query_sizes()[i]
                )));
            }
            if let Some(&u) = f.iter().find(|&&u| u >= game.response_sizes()[i]) {
                return Err(Error::ShapeMismatch(format!("party {i} answers {u}, outside its alphabet")));
            }
        }
        Ok(())
    }

    /// Flat response chosen at every flat query.
    pub fn responses(&self, game: &Game) -> Result<Vec<usize>> {
        self.check(game)?;
        let qs = game.query_shape();
        let rs = game.response_shape();
        let mut u = vec![0usize; self.maps.len()];
        Ok((0..qs.len())
            .map(|x| {
                for (i, &xi) in qs.unflatten(x).iter().enumerate() {
                    u[i] = self.maps[i][xi];
                }
                rs.flatten(&u)
            })
            .collect())
    }

    pub fn to_channel(&self, game: &Game) -> Result<Channel> {
        let nu = game.num_responses();
        let mut mass = vec![0.0; game.num_queries() * nu];
        for (x, u) in self.responses(game)?.into_iter().enumerate() {
            mass[x * nu + u] = 1.0;
        }
        Channel::new(game.query_shape().clone(), game.response_shape().clone(), mass, ChannelKind::Channel)
    }

    /// Uniform over all response functions.
    pub fn random<R: Rng + ?Sized>(game: &Game, rng: &mut R) -> Self {
        let maps = game
            .query_sizes()
            .iter()
            .zip(game.response_sizes())
            .map(|(&q, &r)| (0..q).map(|_| rng.gen_range(0..r)).collect())
            .collect();
        DeterministicStrategy { maps }
    }
}

/// Shared-randomness mixture of deterministic strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvtMixture {
    pub weights: Vec<f64>,
    pub components: Vec<DeterministicStrategy>,
}

impl HvtMixture {
    pub fn new(weights: Vec<f64>, components: Vec<DeterministicStrategy>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if let Some(cell) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMass { cell, value: weights[cell] });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { kind: "mixture weights", total });
        }
        Ok(HvtMixture { weights, components })
    }

    pub fn to_channel(&self, game: &Game) -> Result<Channel> {
        let nu = game.num_responses();
        let mut mass = vec![0.0; game.num_queries() * nu];
        for (w, s) in self.weights.iter().zip(&self.components) {
            for (x, u) in s.responses(game)?.into_iter().enumerate() {
                mass[x * nu + u] += w;
            }
        }
        Channel::new(game.query_shape().clone(), game.response_shape().clone(), mass, ChannelKind::Channel)
    }

    /// `k` uniform deterministic components with Dirichlet(1) weights.
    pub fn random<R: Rng + ?Sized>(game: &Game, k: usize, rng: &mut R) -> Self {
        let components = (0..k).map(|_| DeterministicStrategy::random(game, rng)).collect();
        HvtMixture { weights: dirichlet(k, rng), components }
    }
}

/// `1/2 * [u1 xor u2 = x1 and x2]`.
pub fn pr_box() -> Channel {
    let input = AlphabetShape::parties(Role::Query, &[2, 2]).expect("binary shape");
    let output = AlphabetShape::parties(Role::Response, &[2, 2]).expect("binary shape");
    let mut mass = Vec::with_capacity(16);
    for x in 0..4 {
        let (x1, x2) = (x >> 1, x & 1);
        for u in 0..4 {
            let (u1, u2) = (u >> 1, u & 1);
            mass.push(if u1 ^ u2 == x1 & x2 { 0.5 } else { 0.0 });
        }
    }
    Channel::new(input, output, mass, ChannelKind::Channel).expect("pr box is a channel")
}

/// The channel playing `ch` independently in every coordinate of `rg`.
pub fn repeated_channel(ch: &Channel, rg: &RepeatedGame) -> Result<Channel> {
    let base = rg.base();
    if ch.input() != base.query_shape() || ch.output() != base.response_shape() {
        return Err(Error::ShapeMismatch("channel does not match the base game".into()));
    }
    let g = rg.game();
    let (nx, nu, n) = (g.num_queries(), g.num_responses(), rg.n());
    let mut mass = Vec::with_capacity(nx * nu);
    for x in 0..nx {
        for u in 0..nu {
            let p = (0..n).map(|j| ch.get(rg.base_query(x, j), rg.base_response(u, j))).product();
            mass.push(p);
        }
    }
    Channel::new(g.query_shape().clone(), g.response_shape().clone(), mass, ch.kind())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignallingWitness {
    pub subset: PartySet,
    /// Response letters of the parties in `subset`.
    pub u_a: Vec<usize>,
    /// Two full queries agreeing on `subset` whose `U_A` marginals differ most.
    pub x: Vec<usize>,
    pub x_prime: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NsReport {
    pub nonsignalling: bool,
    pub max_violation: f64,
    pub witness: Option<SignallingWitness>,
}

pub fn is_nonsignalling(ch: &Channel, tol: f64) -> NsReport {
    let m = ch.input().rank();
    let mut best = NsReport { nonsignalling: true, max_violation: 0.0, witness: None };
    for a in proper_subsets(m) {
        let marg = ch
            .marginal_output(&party_labels(ch.output(), a))
            .expect("party labels belong to the channel");
        let a_in = party_labels(ch.input(), a);
        let xa_of = ch.input().projection_map(&a_in).expect("party labels belong to the channel");
        let n_xa = ch.input().select(&a_in).expect("labels exist").len();
        let n_ua = marg.output().len();
        let mut lo = vec![(f64::INFINITY, 0usize); n_xa * n_ua];
        let mut hi = vec![(f64::NEG_INFINITY, 0usize); n_xa * n_ua];
        for (x, &xa) in xa_of.iter().enumerate() {
            for (ua, &p) in marg.row(x).iter().enumerate() {
                let k = xa * n_ua + ua;
                if p < lo[k].0 {
                    lo[k] = (p, x);
                }
                if p > hi[k].0 {
                    hi[k] = (p, x);
                }
            }
        }
        for (k, (l, h)) in lo.iter().zip(&hi).enumerate() {
            let gap = h.0 - l.0;
            if gap > best.max_violation {
                best.max_violation = gap;
                best.witness = Some(SignallingWitness {
                    subset: a,
                    u_a: marg.output().unflatten(k % n_ua),
                    x: ch.input().unflatten(h.1),
                    x_prime: ch.input().unflatten(l.1),
                });
            }
        }
    }
    best.nonsignalling = best.max_violation <= tol;
    best
}

/// Dominating channels `Q_{U_A|X_A}`, one per nonempty proper subset.
#[derive(Clone, Debug, PartialEq)]
pub struct SubNsWitness {
    pub channels: Vec<(PartySet, Channel)>,
}

impl SubNsWitness {
    pub fn get(&self, a: PartySet) -> Option<&Channel> {
        self.channels.iter().find(|(s, _)| *s == a).map(|(_, c)| c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnsReport {
    pub sub_nonsignalling: bool,
    /// First subset whose dominating channel does not exist.
    pub failing_subset: Option<PartySet>,
    pub witness: Option<SubNsWitness>,
    /// Largest `P(u_A|x) - Q(u_A|x_A)` over the witness channels.
    pub max_violation: f64,
}

/// `P(u_A | x)` and the flat `x_A` of every `x`.
fn subset_marginal(ch: &Channel, a: PartySet) -> (Channel, Vec<usize>, AlphabetShape) {
    let marg = ch
        .marginal_output(&party_labels(ch.output(), a))
        .expect("party labels belong to the channel");
    let a_in = party_labels(ch.input(), a);
    let xa_of = ch.input().projection_map(&a_in).expect("labels exist");
    let xa_shape = ch.input().select(&a_in).expect("labels exist");
    (marg, xa_of, xa_shape)
}

/// Feasibility LP for a channel `Q_{U_A|X_A}` with `Q >= P_A - tol`.
pub fn dominating_channel(ch: &Channel, a: PartySet, tol: f64) -> Result<Option<Channel>> {
    let (marg, xa_of, xa_shape) = subset_marginal(ch, a);
    let n_ua = marg.output().len();
    let mut lp = LinearProgram::new(xa_shape.len() * n_ua);
    for xa in 0..xa_shape.len() {
        lp.add_constraint((0..n_ua).map(|ua| (xa * n_ua + ua, 1.0)).collect(), Comparator::Eq, 1.0);
    }
    for (x, &xa) in xa_of.iter().enumerate() {
        for (ua, &p) in marg.row(x).iter().enumerate() {
            if p - tol > 0.0 {
                lp.add_constraint(vec![(xa * n_ua + ua, 1.0)], Comparator::Ge, p - tol);
            }
        }
    }
    let sol = solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(Channel::from_noisy(
            xa_shape,
            marg.output().clone(),
            sol.primal,
            ChannelKind::Channel,
        )?)),
        LpStatus::Infeasible => Ok(None),
        status => Err(Error::LpStatus { what: format!("domination LP for {a}"), status: format!("{status:?}") }),
    }
}

/// Largest excess of `P(u_A|x)` over `q(u_A|x_A)`.
pub fn domination_violation(ch: &Channel, a: PartySet, q: &Channel) -> f64 {
    let (marg, xa_of, _) = subset_marginal(ch, a);
    let mut worst = f64::NEG_INFINITY;
    for (x, &xa) in xa_of.iter().enumerate() {
        for (ua, &p) in marg.row(x).iter().enumerate() {
            worst = worst.max(p - q.get(xa, ua));
        }
    }
    worst
}

pub fn is_sub_nonsignalling(ch: &Channel, tol: f64) -> Result<SnsReport> {
    let m = ch.input().rank();
    let mut channels = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    for a in proper_subsets(m) {
        match dominating_channel(ch, a, tol)? {
            Some(q) => {
                max_violation = max_violation.max(domination_violation(ch, a, &q));
                channels.push((a, q));
            }
            None => {
                return Ok(SnsReport {
                    sub_nonsignalling: false,
                    failing_subset: Some(a),
                    witness: None,
                    max_violation: f64::INFINITY,
                })
            }
        }
    }
    Ok(SnsReport {
        sub_nonsignalling: max_violation <= tol + MEMBERSHIP_TOL,
        failing_subset: None,
        witness: Some(SubNsWitness { channels }),
        max_violation: max_violation.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{anticorrelation, chsh, tensor_power, DEFAULT_BUDGET_CELLS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chsh_value(ch: &Channel) -> f64 {
        let g = chsh();
        let w = g.win_weights();
        w.iter().zip(ch.mass()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn proper_subsets_of_three() {
        let s = proper_subsets(3);
        assert_eq!(s.len(), 6);
        assert!(!s.contains(&PartySet::EMPTY));
        assert!(!s.contains(&PartySet::full(3)));
        assert_eq!(PartySet::from_members(&[0, 2]).complement(3), PartySet::from_members(&[1]));
        assert_eq!(PartySet::from_members(&[0, 2]).to_string(), "{0,2}");
    }

    #[test]
    fn constant_strategy_is_a_point_mass() {
        let g = chsh();
        let ch = DeterministicStrategy::constant(&g, 0).unwrap().to_channel(&g).unwrap();
        for x in 0..4 {
            assert_eq!(ch.row(x), &[1.0, 0.0, 0.0, 0.0]);
        }
        assert_eq!(chsh_value(&ch), 0.75);
    }

    #[test]
    fn equal_mixture_is_half_half() {
        let g = chsh();
        let a = DeterministicStrategy::constant(&g, 0).unwrap();
        let b = DeterministicStrategy::constant(&g, 1).unwrap();
        let ch = HvtMixture::new(vec![0.5, 0.5], vec![a, b]).unwrap().to_channel(&g).unwrap();
        assert_eq!(ch.row(2), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn mixture_weights_must_normalize() {
        let g = chsh();
        let a = DeterministicStrategy::constant(&g, 0).unwrap();
        assert!(HvtMixture::new(vec![0.7], vec![a]).is_err());
    }

    #[test]
    fn strategy_shape_checked() {
        let g = chsh();
        assert!(DeterministicStrategy::new(&g, vec![vec![0, 2], vec![0, 0]]).is_err());
        assert!(DeterministicStrategy::new(&g, vec![vec![0, 1]]).is_err());
    }

    #[test]
    fn pr_box_properties() {
        let pr = pr_box();
        assert_eq!(chsh_value(&pr), 1.0);
        let r = is_nonsignalling(&pr, 0.0);
        assert!(r.nonsignalling);
        assert_eq!(r.max_violation, 0.0);
        let m1 = pr.marginal_output(&[AxisLabel::response(0)]).unwrap();
        for x in 0..4 {
            assert_eq!(m1.row(x), &[0.5, 0.5]);
        }
    }

    #[test]
    fn signalling_channel_detected() {
        let g = chsh();
        let mut mass = vec![0.0; 16];
        for x in 0..4 {
            let x2 = x & 1;
            mass[x * 4 + (x2 << 1)] = 1.0;
        }
        let ch = Channel::new(g.query_shape().clone(), g.response_shape().clone(), mass, ChannelKind::Channel)
            .unwrap();
        let r = is_nonsignalling(&ch, MEMBERSHIP_TOL);
        assert!(!r.nonsignalling);
        assert_eq!(r.max_violation, 1.0);
        let w = r.witness.unwrap();
        assert_eq!(w.subset, PartySet::from_members(&[0]));
        assert_eq!(w.x[0], w.x_prime[0]);
        assert_ne!(w.x[1], w.x_prime[1]);
        let sns = is_sub_nonsignalling(&ch, MEMBERSHIP_TOL).unwrap();
        assert!(!sns.sub_nonsignalling);
        assert_eq!(sns.failing_subset, Some(PartySet::from_members(&[0])));
    }

    #[test]
    fn random_hvt_mixtures_are_nonsignalling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = anticorrelation();
        for _ in 0..20 {
            let ch = HvtMixture::random(&g, 5, &mut rng).to_channel(&g).unwrap();
            assert!(is_nonsignalling(&ch, 1e-12).nonsignalling);
        }
    }

    #[test]
    fn nonsignalling_implies_sub_nonsignalling_with_marginal_witness() {
        let pr = pr_box();
        let r = is_sub_nonsignalling(&pr, MEMBERSHIP_TOL).unwrap();
        assert!(r.sub_nonsignalling);
        let half = pr.scaled(0.5).unwrap();
        assert!(is_sub_nonsignalling(&half, MEMBERSHIP_TOL).unwrap().sub_nonsignalling);
        let q = is_sub_nonsignalling(&pr, 0.0).unwrap().witness.unwrap();
        assert_eq!(q.channels.len(), 2);
        for (_, c) in &q.channels {
            assert!(c.mass().iter().all(|&v| (v - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn repeated_pr_box_wins_everything() {
        let rg = tensor_power(&chsh(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        let ch = repeated_channel(&pr_box(), &rg).unwrap();
        let w = rg.game().win_weights();
        let v: f64 = w.iter().zip(ch.mass()).map(|(a, b)| a * b).sum();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(is_nonsignalling(&ch, 1e-12).nonsignalling);
    }
}
