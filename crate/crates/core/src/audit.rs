//! Constants and checks for the nonsignalling parallel repetition bound.

use nlgame_lp::{solve, Comparator, LinearProgram, LpStatus};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Game, RepeatedGame};
use crate::info::{approx_ns_check, dvar_mass, kl_mass, pinsker_bound};
use crate::strategy::{dominating_channel, is_sub_nonsignalling, proper_subsets, repeated_channel, PartySet, MEMBERSHIP_TOL};
use crate::tensor::{AxisLabel, Channel, ChannelKind, JointTable};
use crate::values::{ns_value, sns_value, subset_maps, value_of_joint};

/// Tolerance for equality steps and for the slack of inequality steps.
pub const AUDIT_TOL: f64 = 1e-9;
/// Slack allowed on the rounding bound.
pub const ROUNDING_TOL: f64 = 1e-8;

/// `C'_m = 2 (2^{m+1} - 3)` and `C_m = (2 ln 2)(C'_m + 1)^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RepetitionConstants {
    pub m: usize,
    pub c_prime: f64,
    pub c: f64,
}

impl RepetitionConstants {
    pub fn new(m: usize) -> Self {
        let c_prime = 2.0 * ((1u64 << (m + 1)) as f64 - 3.0);
        let c = 2.0 * std::f64::consts::LN_2 * (c_prime + 1.0).powi(2);
        RepetitionConstants { m, c_prime, c }
    }
}

pub fn constants(m: usize) -> Result<RepetitionConstants> {
    if !(2..=30).contains(&m) {
        return Err(Error::InvalidArgument(format!("party count {m} outside 2..=30")));
    }
    Ok(RepetitionConstants::new(m))
}

/// `exp(-n nu^2 / C_m)` with the natural exponential.
pub fn repetition_bound(m: usize, n: usize, nu: f64) -> Result<f64> {
    let k = constants(m)?;
    if n == 0 {
        return Err(Error::InvalidArgument("repetition count must be positive".into()));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidArgument(format!("nu {nu} outside (0, 1]")));
    }
    Ok((-(n as f64) * nu * nu / k.c).exp())
}

/// A strategy measure and its restriction to an event.
#[derive(Clone, Debug, PartialEq)]
pub struct ChangeOfMeasure {
    /// `P_X(x) P(u|x)`, possibly subnormalized.
    pub original: JointTable,
    /// `P(x, u) 1[event] / P(event)`.
    pub conditioned: JointTable,
    pub event_probability: f64,
    /// `log2(1 / P(event))`.
    pub exponent: f64,
    /// `D(conditioned || original)`, equal to `exponent`.
    pub divergence: f64,
}

/// Conditions `P_X x strategy` on an indicator over the game's flat
/// `(x, u)` cells.
pub fn condition_on_event(strategy: &Channel, game: &Game, event: &[u8]) -> Result<ChangeOfMeasure> {
    if strategy.input() != game.query_shape() || strategy.output() != game.response_shape() {
        return Err(Error::ShapeMismatch("strategy does not match the game".into()));
    }
    if event.len() != strategy.mass().len() {
        return Err(Error::ShapeMismatch(format!(
            "event has {} cells, the game has {}",
            event.len(),
            strategy.mass().len()
        )));
    }
    let original = strategy.joint(game.query())?;
    let p_event: f64 = original.mass().iter().zip(event).filter(|(_, &e)| e == 1).map(|(p, _)| p).sum();
    if p_event <= 0.0 {
        return Err(Error::ZeroProbabilityEvent);
    }
    let mass: Vec<f64> = original
        .mass()
        .iter()
        .zip(event)
        .map(|(p, &e)| if e == 1 { p / p_event } else { 0.0 })
        .collect();
    let conditioned = JointTable::from_weights(original.shape().clone(), mass)?;
    let divergence = kl_mass(conditioned.mass(), original.mass()).0;
    Ok(ChangeOfMeasure {
        original,
        conditioned,
        event_probability: p_event,
        exponent: -p_event.log2(),
        divergence,
    })
}

fn arranged(joint: &JointTable, game: &Game) -> Result<JointTable> {
    let shape = game.joint_shape();
    let out = joint.permute(shape.labels())?;
    if out.shape() != &shape {
        return Err(Error::ShapeMismatch(format!("joint over {} does not match {}", joint.shape(), game.name())));
    }
    Ok(out)
}

/// Coordinate-averaged single-copy joint of an n-fold joint.
pub fn single_letterize(joint: &JointTable, rg: &RepeatedGame) -> Result<JointTable> {
    let base = rg.base();
    let split = arranged(joint, rg.game())?.reshape(rg.coordinate_shape())?;
    let m = base.parties();
    let base_shape = base.joint_shape();
    let mut mass = vec![0.0; base_shape.len()];
    for j in 0..rg.n() {
        let keep: Vec<AxisLabel> = (0..m)
            .map(|i| AxisLabel::query_at(i, j))
            .chain((0..m).map(|i| AxisLabel::response_at(i, j)))
            .collect();
        let coord = split.marginalize(&keep)?;
        for (acc, p) in mass.iter_mut().zip(coord.mass()) {
            *acc += p / rg.n() as f64;
        }
    }
    JointTable::new(base_shape, mass, joint.normalization())
}

/// n-fold product of a single-copy joint, over the repeated game's axes.
pub fn product_joint(single: &JointTable, rg: &RepeatedGame) -> Result<JointTable> {
    let base = rg.base();
    let p = arranged(single, base)?;
    let g = rg.game();
    let (nx, nu, bnu) = (g.num_queries(), g.num_responses(), base.num_responses());
    let mut mass = Vec::with_capacity(nx * nu);
    for x in 0..nx {
        for u in 0..nu {
            let v = (0..rg.n())
                .map(|j| p.mass()[rg.base_query(x, j) * bnu + rg.base_response(u, j)])
                .product();
            mass.push(v);
        }
    }
    JointTable::new(g.joint_shape(), mass, single.normalization())
}

/// `E[N_omega]` of a joint over the repeated game.
pub fn expected_wins(joint: &JointTable, rg: &RepeatedGame) -> Result<f64> {
    let p = arranged(joint, rg.game())?;
    Ok(p.mass().iter().zip(rg.wins()).map(|(p, &w)| p * f64::from(w)).sum())
}

/// Channel playing the base game's nonsignalling optimum in every copy.
pub fn ns_optimal_product(rg: &RepeatedGame) -> Result<Channel> {
    let v = ns_value(rg.base())?;
    let ch = v.witness.channel().expect("LP witnesses are channels");
    repeated_channel(ch, rg)
}

/// Subchannel playing the base game's sub-nonsignalling optimum in every
/// copy; products of dominated subchannels stay dominated.
pub fn sns_optimal_product(rg: &RepeatedGame) -> Result<Channel> {
    let v = sns_value(rg.base())?;
    let ch = v.witness.channel().expect("LP witnesses are channels");
    repeated_channel(ch, rg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetDistance {
    pub subset: PartySet,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rounding {
    #[serde(skip)]
    pub sns: Channel,
    /// `d_var(target, P_X P')` at the optimal sub-nonsignalling `P'`.
    pub achieved: f64,
    /// `d_var(P_X~, P_X)`.
    pub eps_empty: f64,
    pub eps: Vec<SubsetDistance>,
    /// `eps_empty + 2 sum_A eps_A`.
    pub bound: f64,
    pub within_bound: bool,
}

fn lp_optimum(lp: &LinearProgram, what: &str) -> Result<Vec<f64>> {
    let sol = solve(lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpStatus { what: what.into(), status: format!("{:?}", sol.status) });
    }
    Ok(sol.primal)
}

/// `min_Q d_var(P_{U_A X~}, P_X Q_{U_A|X_A})`.
fn subset_distance(target: &JointTable, game: &Game, a: PartySet) -> Result<f64> {
    let maps = subset_maps(game, a);
    let ua: Vec<AxisLabel> = a.members().iter().map(|&i| AxisLabel::response(i)).collect();
    let keep: Vec<AxisLabel> = game.query_shape().labels().iter().chain(&ua).copied().collect();
    let p = target.marginalize(&keep)?;
    let nx = game.num_queries();
    let nq = maps.n_xa * maps.n_ua;
    let mut lp = LinearProgram::new(nq + nx * maps.n_ua);
    for xa in 0..maps.n_xa {
        lp.add_constraint((0..maps.n_ua).map(|k| (xa * maps.n_ua + k, 1.0)).collect(), Comparator::Eq, 1.0);
    }
    for x in 0..nx {
        let px = game.query_prob(x);
        for k in 0..maps.n_ua {
            let t = nq + x * maps.n_ua + k;
            let q = maps.xa_of[x] * maps.n_ua + k;
            let target = p.mass()[x * maps.n_ua + k];
            lp.set_objective(t, -1.0);
            lp.add_constraint(vec![(t, 1.0), (q, px)], Comparator::Ge, target);
            lp.add_constraint(vec![(t, 1.0), (q, -px)], Comparator::Ge, -target);
        }
    }
    let primal = lp_optimum(&lp, &format!("distance LP for {a}"))?;
    Ok(primal[nq..].iter().sum())
}

/// Closest sub-nonsignalling strategy to a target joint, with the per-subset
/// distances that bound how close it can be.
pub fn round_to_sns(target: &JointTable, game: &Game) -> Result<Rounding> {
    let target = arranged(target, game)?;
    let nx = game.num_queries();
    let nu = game.num_responses();
    let qx = target.marginalize(game.query_shape().labels())?;
    let eps_empty = dvar_mass(qx.mass(), game.query().mass());
    let mut eps = Vec::new();
    for a in proper_subsets(game.parties()) {
        eps.push(SubsetDistance { subset: a, eps: subset_distance(&target, game, a)? });
    }
    let bound = eps_empty + 2.0 * eps.iter().map(|e| e.eps).sum::<f64>();

    let p_vars = nx * nu;
    let mut offsets = Vec::new();
    let mut total = p_vars;
    for a in proper_subsets(game.parties()) {
        let maps = subset_maps(game, a);
        offsets.push((total, maps));
        total += offsets.last().map(|(_, m)| m.n_xa * m.n_ua).unwrap_or(0);
    }
    let t_off = total;
    let mut lp = LinearProgram::new(t_off + p_vars);
    for x in 0..nx {
        lp.add_constraint((0..nu).map(|u| (x * nu + u, 1.0)).collect(), Comparator::Le, 1.0);
    }
    for (off, maps) in &offsets {
        for xa in 0..maps.n_xa {
            let terms = (0..maps.n_ua).map(|k| (off + xa * maps.n_ua + k, 1.0)).collect();
            lp.add_constraint(terms, Comparator::Le, 1.0);
        }
        for x in 0..nx {
            for k in 0..maps.n_ua {
                let mut terms: Vec<(usize, f64)> =
                    (0..nu).filter(|&u| maps.ua_of[u] == k).map(|u| (x * nu + u, 1.0)).collect();
                terms.push((off + maps.xa_of[x] * maps.n_ua + k, -1.0));
                lp.add_constraint(terms, Comparator::Le, 0.0);
            }
        }
    }
    for x in 0..nx {
        let px = game.query_prob(x);
        for u in 0..nu {
            let c = x * nu + u;
            let t = t_off + c;
            let v = target.mass()[c];
            lp.set_objective(t, -1.0);
            lp.add_constraint(vec![(t, 1.0), (c, px)], Comparator::Ge, v);
            lp.add_constraint(vec![(t, 1.0), (c, -px)], Comparator::Ge, -v);
        }
    }
    let primal = lp_optimum(&lp, "rounding LP")?;
    let sns = Channel::from_noisy(
        game.query_shape().clone(),
        game.response_shape().clone(),
        primal[..p_vars].to_vec(),
        ChannelKind::Subchannel,
    )?;
    let achieved = dvar_mass(target.mass(), sns.joint(game.query())?.mass());
    Ok(Rounding { sns, achieved, eps_empty, eps, bound, within_bound: achieved <= bound + ROUNDING_TOL })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Equality,
    Inequality,
    /// Taken from outside the audit and not evaluated.
    CitedExternal,
}

/// One named check `lhs <= rhs` (or `lhs = rhs`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditStep {
    pub name: String,
    pub kind: StepKind,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
    pub pass: bool,
}

impl AuditStep {
    fn at_most(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        AuditStep { name: name.into(), kind: StepKind::Inequality, lhs: Some(lhs), rhs: Some(rhs), slack: Some(slack), pass: slack >= -AUDIT_TOL }
    }

    fn equal(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let slack = (rhs - lhs).abs();
        AuditStep { name: name.into(), kind: StepKind::Equality, lhs: Some(lhs), rhs: Some(rhs), slack: Some(-slack), pass: slack <= AUDIT_TOL }
    }

    fn cited(name: impl Into<String>) -> Self {
        AuditStep { name: name.into(), kind: StepKind::CitedExternal, lhs: None, rhs: None, slack: None, pass: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub game: String,
    pub n: usize,
    pub delta: f64,
    pub event_probability: f64,
    /// `log2(1 / P(C)) / n`.
    pub exponent: f64,
    pub sns_value: f64,
    pub constants: RepetitionConstants,
    pub steps: Vec<AuditStep>,
    pub pass: bool,
    pub failing_step: Option<String>,
}

fn precondition(step: &str, detail: impl Into<String>) -> Error {
    Error::Precondition { step: step.into(), detail: detail.into() }
}

/// `D(p || q)` over the marginal on `keep`.
fn marginal_kl(p: &JointTable, q: &JointTable, keep: &[AxisLabel]) -> Result<f64> {
    Ok(kl_mass(p.marginalize(keep)?.mass(), q.marginalize(keep)?.mass()).0)
}

/// Replays the change-of-measure argument on a concrete strategy for the
/// n-fold game, recording every inequality of the chain.
pub fn audit_repetition(game: &Game, n: usize, delta: f64, strategy: &Channel) -> Result<AuditReport> {
    let rg = crate::game::tensor_power(game, n, crate::game::DEFAULT_BUDGET_CELLS)?;
    audit_repeated(&rg, delta, strategy)
}

pub fn audit_repeated(rg: &RepeatedGame, delta: f64, strategy: &Channel) -> Result<AuditReport> {
    audit_repeated_with(rg, delta, strategy, MEMBERSHIP_TOL)
}

/// As [`audit_repeated`], accepting strategies that dominate up to
/// `membership_tol`.
pub fn audit_repeated_with(
    rg: &RepeatedGame,
    delta: f64,
    strategy: &Channel,
    membership_tol: f64,
) -> Result<AuditReport> {
    let g = rg.game();
    let base = rg.base();
    let n = rg.n();
    let m = base.parties();
    let k = constants(m)?;
    if strategy.input() != g.query_shape() || strategy.output() != g.response_shape() {
        return Err(precondition("strategy shape", format!("expected a strategy on {}", g.name())));
    }
    let sns = is_sub_nonsignalling(strategy, membership_tol)?;
    let witness = match (sns.sub_nonsignalling, sns.witness) {
        (true, Some(w)) => w,
        _ => {
            let detail = match sns.failing_subset {
                Some(a) => format!("no channel on x_A dominates the marginal of subset {a}"),
                None => format!("domination violated by {:e}", sns.max_violation),
            };
            return Err(precondition("sub-nonsignalling strategy", detail));
        }
    };
    let event = rg.threshold_event(delta)?;
    let cm = match condition_on_event(strategy, g, &event) {
        Ok(cm) => cm,
        Err(Error::ZeroProbabilityEvent) => {
            return Err(precondition("threshold event", "the strategy never reaches the threshold"))
        }
        Err(e) => return Err(e),
    };
    let nf = n as f64;
    let exponent = cm.exponent / nf;
    let mut steps = vec![AuditStep::equal("change of measure: D(P~ || P) = log2 1/P(C)", cm.divergence, cm.exponent)];

    let report = approx_ns_check(&cm.conditioned, g, f64::INFINITY)?;
    let queries = g.query_shape().labels().to_vec();
    let px = g.query().mass();
    for gap in &report.gaps {
        let a = gap.subset;
        let ua: Vec<AxisLabel> = a.members().iter().map(|&i| AxisLabel::response(i)).collect();
        let keep: Vec<AxisLabel> = queries.iter().chain(&ua).copied().collect();
        let tilde = cm.conditioned.marginalize(&keep)?;
        // The chain is tight for nonsignalling strategies, so the witness is
        // re-solved without the membership tolerance when possible.
        let tight = dominating_channel(strategy, a, 0.0)?;
        let q = match tight.as_ref() {
            Some(q) => q,
            None => witness.get(a).ok_or_else(|| precondition("dominating channels", format!("no witness for {a}")))?,
        };
        let maps = subset_maps(g, a);
        let reference: Vec<f64> = (0..tilde.mass().len())
            .map(|c| {
                let (x, ua) = (c / maps.n_ua, c % maps.n_ua);
                px[x] * q.get(maps.xa_of[x], ua)
            })
            .collect();
        let d_q = kl_mass(tilde.mass(), &reference).0;
        let d_a = marginal_kl(&cm.conditioned, &cm.original, &keep)?;
        steps.push(AuditStep::at_most(format!("A={a}: gap <= D(P~_(U_A X) || P_X Q_A)"), gap.gap, d_q));
        steps.push(AuditStep::at_most(format!("A={a}: D(P~_(U_A X) || P_X Q_A) <= D(P~_(U_A X) || P_(U_A X))"), d_q, d_a));
        steps.push(AuditStep::at_most(format!("A={a}: D(P~_(U_A X) || P_(U_A X)) <= D(P~ || P)"), d_a, cm.divergence));
        steps.push(AuditStep::at_most(format!("A={a}: gap <= n * exponent"), gap.gap, nf * exponent));
    }

    let wins = expected_wins(&cm.conditioned, rg)?;
    steps.push(AuditStep::at_most("threshold: n * Delta <= E~[N]", nf * delta, wins));

    let single = single_letterize(&cm.conditioned, rg)?;
    let per_copy = value_of_joint(base, &single)?;
    steps.push(AuditStep::equal("additivity: E~[N] = n * E~[omega_J]", wins, nf * per_copy));
    steps.push(AuditStep::cited("superadditivity of the gap over coordinates"));
    let letter = approx_ns_check(&single, base, exponent)?;
    steps.push(AuditStep::at_most("single-letter feasibility: max gap <= exponent", letter.max_gap, exponent));
    steps.push(AuditStep::at_most("per-copy value: Delta <= E~[omega_J]", delta, per_copy));

    let rho = sns_value(base)?.value;
    let ceiling = rho + k.c_prime * pinsker_bound(exponent);
    steps.push(AuditStep::at_most("eta bound: E~[omega_J] <= rho_SNS + C'_m sqrt(2 ln 2 exponent)", per_copy, ceiling));
    steps.push(AuditStep::at_most("violation consistency: Delta <= rho_SNS + C'_m sqrt(2 ln 2 exponent)", delta, ceiling));

    let failing_step = steps.iter().find(|s| !s.pass).map(|s| s.name.clone());
    Ok(AuditReport {
        game: g.name().to_string(),
        n,
        delta,
        event_probability: cm.event_probability,
        exponent,
        sns_value: rho,
        constants: k,
        pass: failing_step.is_none(),
        steps,
        failing_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{anticorrelation, chsh, tensor_power, DEFAULT_BUDGET_CELLS};
    use crate::strategy::pr_box;

    #[test]
    fn constant_values() {
        let two = constants(2).unwrap();
        assert_eq!(two.c_prime, 10.0);
        assert!((two.c - 167.74).abs() < 0.01);
        let three = constants(3).unwrap();
        assert_eq!(three.c_prime, 26.0);
        assert!((three.c - 1010.61).abs() < 0.01);
        let ratio = three.c / (three.c_prime * three.c_prime);
        assert!((ratio - 2.0 * std::f64::consts::LN_2 * (1.0 + 1.0 / 26.0f64).powi(2)).abs() < 1e-12);
        assert!(constants(1).is_err());
    }

    #[test]
    fn bound_examples() {
        assert!((repetition_bound(3, 10_000, 0.3).unwrap() - 0.4105).abs() < 1e-4);
        assert!((repetition_bound(2, 168, 1.0).unwrap() - 0.36731).abs() < 1e-5);
        assert!((repetition_bound(2, 1, 1e-9).unwrap() - 1.0).abs() < 1e-12);
        assert!(repetition_bound(2, 1, 0.0).is_err());
    }

    #[test]
    fn conditioning_half_the_cells_costs_one_bit() {
        let g = chsh();
        let uniform = Channel::new(
            g.query_shape().clone(),
            g.response_shape().clone(),
            vec![0.25; 16],
            ChannelKind::Channel,
        )
        .unwrap();
        let event: Vec<u8> = (0..16).map(|c| u8::from(c % 4 < 2)).collect();
        let cm = condition_on_event(&uniform, &g, &event).unwrap();
        assert!((cm.exponent - 1.0).abs() < 1e-12);
        assert!((cm.divergence - 1.0).abs() < 1e-12);
        let win = condition_on_event(&pr_box(), &g, g.predicate()).unwrap();
        assert_eq!(win.exponent, 0.0);
        assert_eq!(win.conditioned, win.original);
        assert!(matches!(
            condition_on_event(&uniform, &g, &[0; 16]),
            Err(Error::ZeroProbabilityEvent)
        ));
    }

    #[test]
    fn whole_event_normalizes_a_subchannel() {
        let g = chsh();
        let half = pr_box().scaled(0.5).unwrap();
        let cm = condition_on_event(&half, &g, &[1; 16]).unwrap();
        assert!((cm.exponent - 1.0).abs() < 1e-12);
        assert!((cm.conditioned.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_letter_of_a_product_is_the_factor() {
        let g = chsh();
        let rg = tensor_power(&g, 2, DEFAULT_BUDGET_CELLS).unwrap();
        let single = pr_box().joint(g.query()).unwrap();
        let prod = product_joint(&single, &rg).unwrap();
        let back = single_letterize(&prod, &rg).unwrap();
        for (a, b) in back.mass().iter().zip(single.mass()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((expected_wins(&prod, &rg).unwrap() - 2.0).abs() < 1e-12);
        let one = tensor_power(&g, 1, DEFAULT_BUDGET_CELLS).unwrap();
        let same = single_letterize(&single, &one).unwrap();
        assert_eq!(same.mass(), single.mass());
    }

    #[test]
    fn rounding_a_nonsignalling_target_is_free() {
        let g = chsh();
        let target = pr_box().joint(g.query()).unwrap();
        let r = round_to_sns(&target, &g).unwrap();
        assert!(r.achieved < 1e-9);
        assert!(r.eps_empty < 1e-12);
        assert!(r.eps.iter().all(|e| e.eps < 1e-9));
        assert!(r.within_bound);
    }

    #[test]
    fn rounding_a_perturbed_target_respects_the_bound() {
        let g = anticorrelation();
        let ch = ns_value(&g).unwrap().witness.channel().unwrap().clone();
        let base = ch.joint(g.query()).unwrap();
        let mut mass = base.mass().to_vec();
        mass[7] += 0.01;
        let target = JointTable::from_weights(base.shape().clone(), mass).unwrap();
        let r = round_to_sns(&target, &g).unwrap();
        assert!(r.achieved > 0.0);
        assert!(r.within_bound, "{} > {}", r.achieved, r.bound);
    }

    #[test]
    fn chsh_product_audit_degenerates() {
        let g = chsh();
        let rg = tensor_power(&g, 2, DEFAULT_BUDGET_CELLS).unwrap();
        let ch = repeated_channel(&pr_box(), &rg).unwrap();
        let r = audit_repeated(&rg, 1.0, &ch).unwrap();
        assert!(r.pass, "{:?}", r.failing_step);
        assert_eq!(r.event_probability, 1.0);
        assert_eq!(r.exponent, 0.0);
    }

    #[test]
    fn anticorrelation_ns_product_audit_passes() {
        let rg = tensor_power(&anticorrelation(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        let ch = ns_optimal_product(&rg).unwrap();
        let r = audit_repeated(&rg, 1.0, &ch).unwrap();
        assert!(r.pass, "{:#?}", r.steps.iter().filter(|s| !s.pass).collect::<Vec<_>>());
        assert!((r.event_probability - 4.0 / 9.0).abs() < 1e-6);
        let last = r.steps.last().unwrap();
        assert!(last.slack.unwrap() >= 0.0);
    }

    #[test]
    fn signalling_strategy_is_rejected() {
        let g = chsh();
        let rg = tensor_power(&g, 1, DEFAULT_BUDGET_CELLS).unwrap();
        // Bob answers Alice's input.
        let mut mass = vec![0.0; 16];
        for x in 0..4 {
            mass[x * 4 + x / 2] = 1.0;
        }
        let ch = Channel::new(g.query_shape().clone(), g.response_shape().clone(), mass, ChannelKind::Channel).unwrap();
        match audit_repeated(&rg, 1.0, &ch) {
            Err(Error::Precondition { step, .. }) => assert_eq!(step, "sub-nonsignalling strategy"),
            other => panic!("expected a precondition failure, got {other:?}"),
        }
    }
}
