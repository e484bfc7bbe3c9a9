//! Game values under each strategy class, threshold values of repeated
//! games, and bounds on `eta_NS`.

use std::fmt;
use std::str::FromStr;

use nlgame_lp::{solve_with, BigRational, Comparator, LinearProgram, LpScalar, LpStatus, SolverOptions};
use num::{BigInt, Integer, One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::audit::RepetitionConstants;
use crate::error::{Error, Result};
use crate::game::{tensor_power, Game, DEFAULT_BUDGET_CELLS};
use crate::info::{approx_ns_check, pinsker_bound, ApproxNsReport};
use crate::sampling::dirichlet;
use crate::strategy::{proper_subsets, DeterministicStrategy, HvtMixture, PartySet, SubNsWitness};
use crate::tensor::{AxisLabel, Channel, ChannelKind, JointTable, Normalization};

pub const WITNESS_TOL: f64 = 1e-8;

/// Size limits for enumeration, game tables and LP tableaus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub table_cells: usize,
    pub enumeration: usize,
    pub lp_entries: usize,
}

impl Limits {
    pub fn from_cells(cells: usize) -> Self {
        Limits { table_cells: cells, enumeration: cells, lp_entries: cells.saturating_mul(10) }
    }
}

impl Default for Limits {
    fn default() -> Self {
        Limits::from_cells(DEFAULT_BUDGET_CELLS)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveOptions {
    pub limits: Limits,
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyClass {
    Classical,
    Ns,
    Sns,
}

impl fmt::Display for StrategyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyClass::Classical => "classical",
            StrategyClass::Ns => "ns",
            StrategyClass::Sns => "sns",
        })
    }
}

impl FromStr for StrategyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(StrategyClass::Classical),
            "ns" => Ok(StrategyClass::Ns),
            "sns" => Ok(StrategyClass::Sns),
            other => Err(Error::InvalidArgument(format!("unknown strategy class {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverMeta {
    pub backend: &'static str,
    pub status: String,
    pub residual: f64,
    pub iterations: usize,
    pub variables: usize,
    pub constraints: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    Deterministic(DeterministicStrategy),
    Channel(Channel),
    SubChannel { channel: Channel, dominating: SubNsWitness },
    Joint(JointTable),
}

impl Witness {
    pub fn channel(&self) -> Option<&Channel> {
        match self {
            Witness::Channel(c) | Witness::SubChannel { channel: c, .. } => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueResult {
    pub value: f64,
    pub exact: Option<BigRational>,
    pub witness: Witness,
    pub meta: Option<SolverMeta>,
}

fn check_channel_shape(game: &Game, ch: &Channel) -> Result<()> {
    if ch.input() != game.query_shape() || ch.output() != game.response_shape() {
        return Err(Error::ShapeMismatch(format!(
            "channel {} -> {} does not match game {} -> {}",
            ch.input(),
            ch.output(),
            game.query_shape(),
            game.response_shape()
        )));
    }
    Ok(())
}

/// `sum_x P_X(x) sum_u ch(u|x) omega(x, u)`.
pub fn value_of_channel(game: &Game, ch: &Channel) -> Result<f64> {
    check_channel_shape(game, ch)?;
    Ok(game.win_weights().iter().zip(ch.mass()).map(|(w, p)| w * p).sum())
}

/// Expected win of a joint over the game's query and response axes.
pub fn value_of_joint(game: &Game, joint: &JointTable) -> Result<f64> {
    let order: Vec<AxisLabel> = game.joint_shape().labels().to_vec();
    let arranged = joint.permute(&order)?;
    if arranged.shape() != &game.joint_shape() {
        return Err(Error::ShapeMismatch(format!("joint over {} does not match the game", joint.shape())));
    }
    Ok(arranged
        .mass()
        .iter()
        .zip(game.predicate())
        .map(|(p, &w)| if w == 1 { *p } else { 0.0 })
        .sum())
}

/// Query masses as integers over a common denominator, when they fit.
fn integer_query(game: &Game) -> Option<(Vec<u128>, BigInt)> {
    let ex = game.exact_query()?;
    let denom = ex.mass().iter().fold(BigInt::one(), |acc, m| acc.lcm(m.denom()));
    denom.to_u64()?;
    let nums = ex
        .mass()
        .iter()
        .map(|m| (m.numer() * (&denom / m.denom())).to_u128())
        .collect::<Option<Vec<_>>>()?;
    Some((nums, denom))
}

pub fn classical_value(game: &Game) -> Result<ValueResult> {
    classical_value_with(game, &Limits::default())
}

/// Exhaustive maximum over deterministic strategy tuples. With exact query
/// masses the search runs in integers and the optimum is exact.
pub fn classical_value_with(game: &Game, limits: &Limits) -> Result<ValueResult> {
    let mut count: u128 = 1;
    for (&q, &r) in game.query_sizes().iter().zip(game.response_sizes()) {
        count = count.saturating_mul((r as u128).saturating_pow(q as u32));
    }
    if count > limits.enumeration as u128 {
        return Err(Error::Budget {
            what: "classical strategy enumeration (use the ns or sns relaxation instead)".into(),
            cells: count,
            budget: limits.enumeration as u128,
        });
    }
    let m = game.parties();
    let qs = game.query_shape();
    let rs = game.response_shape();
    let nu = game.num_responses();
    let queries: Vec<Vec<usize>> = (0..qs.len()).map(|x| qs.unflatten(x)).collect();
    let ints = integer_query(game);
    let floats = game.query().mass();

    let mut maps: Vec<Vec<usize>> = game.query_sizes().iter().map(|&s| vec![0; s]).collect();
    let mut best_maps = maps.clone();
    let mut best_int: Option<u128> = None;
    let mut best_float = f64::NEG_INFINITY;
    let mut u = vec![0usize; m];
    loop {
        let mut vi: u128 = 0;
        let mut vf = 0.0;
        for (x, xs) in queries.iter().enumerate() {
            for i in 0..m {
                u[i] = maps[i][xs[i]];
            }
            if game.predicate()[x * nu + rs.flatten(&u)] == 1 {
                match &ints {
                    Some((nums, _)) => vi += nums[x],
                    None => vf += floats[x],
                }
            }
        }
        let better = match &ints {
            Some(_) => best_int.is_none_or(|b| vi > b),
            None => vf > best_float,
        };
        if better {
            best_int = Some(vi);
            best_float = vf;
            best_maps.clone_from(&maps);
        }
        // Odometer over (party, letter) positions.
        let mut carried = true;
        'advance: for i in 0..m {
            for xi in 0..maps[i].len() {
                maps[i][xi] += 1;
                if maps[i][xi] < game.response_sizes()[i] {
                    carried = false;
                    break 'advance;
                }
                maps[i][xi] = 0;
            }
        }
        if carried {
            break;
        }
    }
    let witness = DeterministicStrategy::new(game, best_maps)?;
    let (value, exact) = match (&ints, best_int) {
        (Some((_, denom)), Some(b)) => {
            let r = BigRational::new(BigInt::from(b), denom.clone());
            (ToPrimitive::to_f64(&r).unwrap_or(f64::NAN), Some(r))
        }
        _ => (best_float, None),
    };
    Ok(ValueResult { value, exact, witness: Witness::Deterministic(witness), meta: None })
}

fn float_weights(game: &Game, event: &[u8]) -> Vec<f64> {
    let nu = game.num_responses();
    event
        .iter()
        .enumerate()
        .map(|(c, &e)| if e == 1 { game.query_prob(c / nu) } else { 0.0 })
        .collect()
}

fn exact_weights(game: &Game, event: &[u8]) -> Result<Vec<BigRational>> {
    let nu = game.num_responses();
    let query: Vec<BigRational> = match game.exact_query() {
        Some(ex) => ex.mass().to_vec(),
        None => game
            .query()
            .mass()
            .iter()
            .map(|&p| {
                BigRational::from_float(p)
                    .ok_or_else(|| Error::InvalidArgument(format!("query mass {p} is not finite")))
            })
            .collect::<Result<_>>()?,
    };
    Ok(event
        .iter()
        .enumerate()
        .map(|(c, &e)| if e == 1 { query[c / nu].clone() } else { Zero::zero() })
        .collect())
}

/// Per-subset index maps: flat response to `u_A`, flat query to `x_A`.
pub(crate) struct SubsetMaps {
    pub(crate) ua_of: Vec<usize>,
    pub(crate) xa_of: Vec<usize>,
    pub(crate) n_ua: usize,
    pub(crate) n_xa: usize,
}

pub(crate) fn subset_maps(game: &Game, a: PartySet) -> SubsetMaps {
    let pick = |labels: &[AxisLabel]| -> Vec<AxisLabel> { a.members().iter().map(|&i| labels[i]).collect() };
    let ql = pick(game.query_shape().labels());
    let rl = pick(game.response_shape().labels());
    SubsetMaps {
        ua_of: game.response_shape().projection_map(&rl).expect("game labels"),
        xa_of: game.query_shape().projection_map(&ql).expect("game labels"),
        n_ua: game.response_shape().select(&rl).expect("game labels").len(),
        n_xa: game.query_shape().select(&ql).expect("game labels").len(),
    }
}

/// Nonsignalling LP over the channel rows of `queries`, with equality rows
/// for every subset in `subsets`. Variable `(k, u)` is `P(u | queries[k])`.
fn ns_program<T: LpScalar>(
    game: &Game,
    weights: &[T],
    queries: &[usize],
    subsets: &[PartySet],
) -> LinearProgram<T> {
    let nu = game.num_responses();
    let mut lp = LinearProgram::new(queries.len() * nu);
    for (k, &x) in queries.iter().enumerate() {
        for u in 0..nu {
            let w = &weights[x * nu + u];
            if !w.is_exact_zero() {
                lp.set_objective(k * nu + u, w.clone());
            }
        }
        lp.add_constraint((0..nu).map(|u| (k * nu + u, T::one())).collect(), Comparator::Eq, T::one());
    }
    for &a in subsets {
        let maps = subset_maps(game, a);
        let mut reference: Vec<Option<usize>> = vec![None; maps.n_xa];
        for (k, &x) in queries.iter().enumerate() {
            let xa = maps.xa_of[x];
            let Some(r) = reference[xa] else {
                reference[xa] = Some(k);
                continue;
            };
            for ua in 0..maps.n_ua {
                let mut terms = Vec::new();
                for u in (0..nu).filter(|&u| maps.ua_of[u] == ua) {
                    terms.push((k * nu + u, T::one()));
                    terms.push((r * nu + u, T::one().neg()));
                }
                lp.add_constraint(terms, Comparator::Eq, T::zero());
            }
        }
    }
    lp
}

/// Subsets of size `m - 1`; with every query row present these imply the
/// conditions for all smaller subsets.
fn maximal_subsets(m: usize) -> Vec<PartySet> {
    proper_subsets(m).into_iter().filter(|a| a.len() == m - 1).collect()
}

struct SnsLayout {
    p_vars: usize,
    q_offsets: Vec<(PartySet, usize, SubsetMaps)>,
}

/// Sub-nonsignalling LP: subchannel `P` plus one channel `Q_A` per subset
/// with `P_A <= Q_A`. Normalization of `Q_A` is relaxed to `<= 1`; any
/// feasible `Q_A` can be topped up to a channel without breaking domination.
fn sns_program<T: LpScalar>(game: &Game, weights: &[T]) -> (LinearProgram<T>, SnsLayout) {
    let nx = game.num_queries();
    let nu = game.num_responses();
    let p_vars = nx * nu;
    let mut q_offsets = Vec::new();
    let mut total = p_vars;
    for a in proper_subsets(game.parties()) {
        let maps = subset_maps(game, a);
        let size = maps.n_xa * maps.n_ua;
        q_offsets.push((a, total, maps));
        total += size;
    }
    let mut lp = LinearProgram::new(total);
    for (c, w) in weights.iter().enumerate() {
        if !w.is_exact_zero() {
            lp.set_objective(c, w.clone());
        }
    }
    for x in 0..nx {
        lp.add_constraint((0..nu).map(|u| (x * nu + u, T::one())).collect(), Comparator::Le, T::one());
    }
    for (_, off, maps) in &q_offsets {
        for xa in 0..maps.n_xa {
            let terms = (0..maps.n_ua).map(|ua| (off + xa * maps.n_ua + ua, T::one())).collect();
            lp.add_constraint(terms, Comparator::Le, T::one());
        }
        for x in 0..nx {
            let xa = maps.xa_of[x];
            for ua in 0..maps.n_ua {
                let mut terms: Vec<(usize, T)> = (0..nu)
                    .filter(|&u| maps.ua_of[u] == ua)
                    .map(|u| (x * nu + u, T::one()))
                    .collect();
                terms.push((off + xa * maps.n_ua + ua, T::one().neg()));
                lp.add_constraint(terms, Comparator::Le, T::zero());
            }
        }
    }
    (lp, SnsLayout { p_vars, q_offsets })
}

fn check_lp_size<T: LpScalar>(lp: &LinearProgram<T>, limits: &Limits, what: &str) -> Result<()> {
    let rows = lp.constraints().len() as u128;
    let entries = rows * (lp.num_vars() as u128 + rows);
    if entries > limits.lp_entries as u128 {
        return Err(Error::Budget { what: what.to_string(), cells: entries, budget: limits.lp_entries as u128 });
    }
    Ok(())
}

struct Solved {
    value: f64,
    exact: Option<BigRational>,
    primal: Vec<f64>,
    meta: SolverMeta,
}

fn run_lp<T: LpScalar>(lp: &LinearProgram<T>, backend: &'static str, what: &str) -> Result<(Solved, Vec<T>)> {
    let sol = solve_with(lp, &SolverOptions::default())?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpStatus { what: what.to_string(), status: format!("{:?}", sol.status) });
    }
    let meta = SolverMeta {
        backend,
        status: "optimal".into(),
        residual: sol.max_residual,
        iterations: sol.iterations,
        variables: lp.num_vars(),
        constraints: lp.constraints().len(),
    };
    let primal = sol.primal.iter().map(LpScalar::to_f64).collect();
    Ok((Solved { value: sol.objective.to_f64(), exact: None, primal, meta }, sol.primal))
}

fn solve_ns(game: &Game, event: &[u8], opts: &SolveOptions, what: &str) -> Result<Solved> {
    let queries: Vec<usize> = (0..game.num_queries()).collect();
    let subsets = maximal_subsets(game.parties());
    if opts.exact {
        let lp = ns_program(game, &exact_weights(game, event)?, &queries, &subsets);
        check_lp_size(&lp, &opts.limits, what)?;
        let (mut s, primal) = run_lp(&lp, "simplex-exact", what)?;
        s.exact = Some(objective_exact(&lp, &primal));
        Ok(s)
    } else {
        let lp = ns_program(game, &float_weights(game, event), &queries, &subsets);
        check_lp_size(&lp, &opts.limits, what)?;
        Ok(run_lp(&lp, "simplex-f64", what)?.0)
    }
}

fn objective_exact(lp: &LinearProgram<BigRational>, primal: &[BigRational]) -> BigRational {
    lp.objective().iter().zip(primal).fold(<BigRational as Zero>::zero(), |acc, (c, x)| acc + c * x)
}

fn verified(game: &Game, event: &[u8], solved: Solved, witness: Witness) -> Result<ValueResult> {
    let ch = witness.channel().expect("LP witnesses are channels");
    check_channel_shape(game, ch)?;
    let nu = game.num_responses();
    let replay: f64 = ch
        .mass()
        .iter()
        .enumerate()
        .filter(|(i, _)| event[*i] == 1)
        .map(|(i, p)| game.query_prob(i / nu) * p)
        .sum();
    if (replay - solved.value).abs() > WITNESS_TOL {
        return Err(Error::LpStatus {
            what: "witness re-evaluation".into(),
            status: format!("objective {} but witness wins {replay}", solved.value),
        });
    }
    let value = solved.exact.as_ref().and_then(ToPrimitive::to_f64).unwrap_or(solved.value);
    Ok(ValueResult { value, exact: solved.exact, witness, meta: Some(solved.meta) })
}

fn ns_result(game: &Game, event: &[u8], opts: &SolveOptions, what: &str) -> Result<ValueResult> {
    let solved = solve_ns(game, event, opts, what)?;
    let ch = Channel::from_noisy(
        game.query_shape().clone(),
        game.response_shape().clone(),
        solved.primal.clone(),
        ChannelKind::Channel,
    )?;
    verified(game, event, solved, Witness::Channel(ch))
}

pub fn ns_value(game: &Game) -> Result<ValueResult> {
    ns_value_with(game, &SolveOptions::default())
}

pub fn ns_value_with(game: &Game, opts: &SolveOptions) -> Result<ValueResult> {
    ns_result(game, game.predicate(), opts, "nonsignalling value LP")
}

fn sns_result(game: &Game, event: &[u8], opts: &SolveOptions, what: &str) -> Result<ValueResult> {
    let (solved, layout) = if opts.exact {
        let (lp, layout) = sns_program(game, &exact_weights(game, event)?);
        check_lp_size(&lp, &opts.limits, what)?;
        let (mut s, primal) = run_lp(&lp, "simplex-exact", what)?;
        s.exact = Some(objective_exact(&lp, &primal));
        (s, layout)
    } else {
        let (lp, layout) = sns_program(game, &float_weights(game, event));
        check_lp_size(&lp, &opts.limits, what)?;
        (run_lp(&lp, "simplex-f64", what)?.0, layout)
    };
    let channel = Channel::from_noisy(
        game.query_shape().clone(),
        game.response_shape().clone(),
        solved.primal[..layout.p_vars].to_vec(),
        ChannelKind::Subchannel,
    )?;
    let mut channels = Vec::new();
    for (a, off, maps) in &layout.q_offsets {
        let mut q = solved.primal[*off..off + maps.n_xa * maps.n_ua].to_vec();
        for row in q.chunks_mut(maps.n_ua) {
            let total: f64 = row.iter().map(|v| v.max(0.0)).sum();
            let fill = (1.0 - total).max(0.0) / maps.n_ua as f64;
            row.iter_mut().for_each(|v| *v = v.max(0.0) + fill);
        }
        let pick = |labels: &[AxisLabel]| -> Vec<AxisLabel> { a.members().iter().map(|&i| labels[i]).collect() };
        let input = game.query_shape().select(&pick(game.query_shape().labels()))?;
        let output = game.response_shape().select(&pick(game.response_shape().labels()))?;
        channels.push((*a, Channel::from_noisy(input, output, q, ChannelKind::Channel)?));
    }
    verified(game, event, solved, Witness::SubChannel { channel, dominating: SubNsWitness { channels } })
}

pub fn sns_value(game: &Game) -> Result<ValueResult> {
    sns_value_with(game, &SolveOptions::default())
}

pub fn sns_value_with(game: &Game, opts: &SolveOptions) -> Result<ValueResult> {
    sns_result(game, game.predicate(), opts, "sub-nonsignalling value LP")
}

/// `Pr(N_omega >= n * delta)` maximized over the class on `n` copies.
pub fn threshold_value(
    game: &Game,
    n: usize,
    delta: f64,
    class: StrategyClass,
    opts: &SolveOptions,
) -> Result<ValueResult> {
    let rg = tensor_power(game, n, opts.limits.table_cells)?;
    let event = rg.threshold_event(delta)?;
    let what = format!("threshold LP for {}", rg.game().name());
    match class {
        StrategyClass::Ns => ns_result(rg.game(), &event, opts, &what),
        StrategyClass::Sns => sns_result(rg.game(), &event, opts, &what),
        StrategyClass::Classical => Err(Error::InvalidArgument(
            "threshold values are computed for the ns and sns classes only".into(),
        )),
    }
}

/// Optimum over joints `q(x) W(u|x)` with `W_A(u_A | x)` constant in
/// `x_{A^c}` across the support of `q`: exactly the joints with query
/// marginal `q` whose conditional mutual information terms all vanish.
fn support_ns_joint(game: &Game, q: &[f64]) -> Result<(f64, JointTable)> {
    let nu = game.num_responses();
    let support: Vec<usize> = (0..q.len()).filter(|&x| q[x] > 0.0).collect();
    let mut weights = vec![0.0; game.num_queries() * nu];
    for &x in &support {
        for u in 0..nu {
            if game.omega(x, u) == 1 {
                weights[x * nu + u] = q[x];
            }
        }
    }
    let lp = ns_program(game, &weights, &support, &proper_subsets(game.parties()));
    let (solved, _) = run_lp(&lp, "simplex-f64", "support-restricted nonsignalling LP")?;
    let mut mass = vec![0.0; game.num_queries() * nu];
    for (k, &x) in support.iter().enumerate() {
        let row = &solved.primal[k * nu..(k + 1) * nu];
        let total: f64 = row.iter().map(|v| v.max(0.0)).sum();
        for u in 0..nu {
            mass[x * nu + u] = q[x] * row[u].max(0.0) / total;
        }
    }
    let joint = JointTable::from_weights(game.joint_shape(), mass)?;
    Ok((value_of_joint(game, &joint)?, joint))
}

/// `rho_SNS(G) + C'_m sqrt(2 ln 2 delta)`; may exceed 1.
pub fn eta_upper_bound_from(sns: f64, m: usize, delta: f64) -> f64 {
    sns + RepetitionConstants::new(m).c_prime * pinsker_bound(delta)
}

pub fn eta_upper_bound(game: &Game, delta: f64) -> Result<f64> {
    if delta < 0.0 {
        return Err(Error::InvalidArgument(format!("delta {delta} is negative")));
    }
    Ok(eta_upper_bound_from(sns_value(game)?.value, game.parties(), delta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EtaOptions {
    pub restarts: usize,
    pub seed: u64,
    pub iterations: usize,
}

impl Default for EtaOptions {
    fn default() -> Self {
        EtaOptions { restarts: 64, seed: 0, iterations: 40 }
    }
}

fn gap_within(game: &Game, joint: &JointTable, delta: f64) -> bool {
    approx_ns_check(joint, game, delta).is_ok_and(|r| r.max_gap <= delta)
}

/// Largest `t` in `[0, 1]` (by bisection) with `(1 - t) from + t to`
/// inside the gap budget; `from` must be inside it.
fn project(game: &Game, from: &JointTable, to: &JointTable, delta: f64, steps: usize) -> JointTable {
    if gap_within(game, to, delta) {
        return to.clone();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let trial = from.mix(to, mid).expect("same shape");
        if gap_within(game, &trial, delta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from.mix(to, lo).expect("same shape")
}

/// Query subsets whose conditioned distribution stays within `delta` bits.
fn candidate_supports(game: &Game, delta: f64) -> Vec<Vec<usize>> {
    let px = game.query().mass();
    let support: Vec<usize> = (0..px.len()).filter(|&x| px[x] > 0.0).collect();
    let affordable = |s: &Vec<usize>| {
        let mass: f64 = s.iter().map(|&x| px[x]).sum();
        (1.0 / mass).log2() <= delta
    };
    let mut out = vec![support.clone()];
    if delta <= 0.0 {
        return out;
    }
    if support.len() <= 10 {
        for bits in 1u32..(1 << support.len()) - 1 {
            let s: Vec<usize> = (0..support.len()).filter(|&k| bits >> k & 1 == 1).map(|k| support[k]).collect();
            if affordable(&s) {
                out.push(s);
            }
        }
    } else {
        for &x in &support {
            let single = vec![x];
            if affordable(&single) {
                out.push(single);
            }
            let rest: Vec<usize> = support.iter().copied().filter(|&y| y != x).collect();
            if affordable(&rest) {
                out.push(rest);
            }
        }
    }
    out
}

fn ascend(
    game: &Game,
    start: &JointTable,
    delta: f64,
    iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, JointTable)> {
    let nu = game.num_responses();
    let px = game.query().mass();
    let floor: Vec<f64> = (0..px.len() * nu).map(|c| px[c / nu] / nu as f64).collect();
    let mut current = start.clone();
    let mut value = value_of_joint(game, &current)?;
    let mut eta = 1.0;
    for _ in 0..iterations {
        if value >= 1.0 - 1e-12 || eta < 1e-4 {
            break;
        }
        let eps = 0.05 * rng.gen::<f64>();
        let proposal: Vec<f64> = current
            .mass()
            .iter()
            .zip(&floor)
            .enumerate()
            .map(|(c, (&p, &f))| {
                let tilt = eta * (f64::from(game.predicate()[c]) - value) + 0.3 * eta * (rng.gen::<f64>() - 0.5);
                (1.0 - eps) * p * tilt.exp() + eps * f
            })
            .collect();
        let proposal = JointTable::from_weights(game.joint_shape(), proposal)?;
        let next = project(game, &current, &proposal, delta, 20);
        let v = value_of_joint(game, &next)?;
        if v > value + 1e-12 {
            current = next;
            value = v;
        } else {
            eta *= 0.5;
        }
    }
    Ok((value, current))
}

pub fn eta_lower_search(game: &Game, delta: f64, restarts: usize, seed: u64) -> Result<ValueResult> {
    eta_lower_search_with(game, delta, &EtaOptions { restarts, seed, ..EtaOptions::default() })
}

/// Certified lower bound on `eta_NS(G, delta)`.
///
/// Candidates are support-restricted nonsignalling optima on query subsets
/// affordable within `delta`; for `delta > 0` each restart then climbs by
/// exponential tilting, projecting back by bisection toward its feasible
/// start. The returned joint is re-checked with [`approx_ns_check`].
pub fn eta_lower_search_with(game: &Game, delta: f64, opts: &EtaOptions) -> Result<ValueResult> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta {delta} must be finite and nonnegative")));
    }
    let px = game.query().mass();
    let mut candidates = Vec::new();
    for s in candidate_supports(game, delta) {
        let mass: f64 = s.iter().map(|&x| px[x]).sum();
        let mut q = vec![0.0; px.len()];
        for &x in &s {
            q[x] = px[x] / mass;
        }
        let (v, joint) = support_ns_joint(game, &q)?;
        if approx_ns_check(&joint, game, delta)?.passes {
            candidates.push((v, joint));
        }
    }
    // Stable sort keeps enumeration order among ties.
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    if candidates.is_empty() {
        return Err(Error::Precondition {
            step: "eta search".into(),
            detail: "no feasible starting point".into(),
        });
    }

    let (mut best_value, mut best) = candidates[0].clone();
    if delta > 0.0 && best_value < 1.0 - 1e-12 {
        let runs: Vec<(f64, JointTable)> = (0..opts.restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                let start = &candidates[r % candidates.len()].1;
                ascend(game, start, delta, opts.iterations, &mut rng)
            })
            .collect::<Result<_>>()?;
        for (v, joint) in runs {
            if v > best_value {
                best_value = v;
                best = joint;
            }
        }
    }

    let report: ApproxNsReport = approx_ns_check(&best, game, delta)?;
    if !report.passes {
        return Err(Error::Precondition {
            step: "eta search".into(),
            detail: format!("best point has gap {} above {delta}", report.max_gap),
        });
    }
    Ok(ValueResult {
        value: best_value,
        exact: None,
        witness: Witness::Joint(best),
        meta: Some(SolverMeta {
            backend: "search",
            status: "certified-feasible".into(),
            residual: report.max_gap,
            iterations: opts.restarts,
            variables: game.joint_shape().len(),
            constraints: report.gaps.len(),
        }),
    })
}

/// Random joint inside the gap budget: a Dirichlet joint on the query
/// support, pulled toward `P_X x` (random local strategy) until it passes.
pub fn sample_feasible_joint<R: Rng + ?Sized>(game: &Game, delta: f64, rng: &mut R) -> Result<JointTable> {
    let anchor = HvtMixture::random(game, 3, rng).to_channel(game)?.joint(game.query())?;
    let nu = game.num_responses();
    let px = game.query().mass();
    let support: Vec<usize> = (0..px.len()).filter(|&x| px[x] > 0.0).collect();
    let qx = dirichlet(support.len(), rng);
    let mut mass = vec![0.0; px.len() * nu];
    for (k, &x) in support.iter().enumerate() {
        for (u, w) in dirichlet(nu, rng).into_iter().enumerate() {
            mass[x * nu + u] = qx[k] * w;
        }
    }
    let target = JointTable::new(game.joint_shape(), mass, Normalization::Distribution)
        .or_else(|_| JointTable::from_weights(game.joint_shape(), anchor.mass().to_vec()))?;
    Ok(project(game, &anchor, &target, delta, 30))
}
