//! Discrete information measures in bits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::Game;
use crate::strategy::{proper_subsets, PartySet};
use crate::tensor::{AxisLabel, JointTable};

pub const GAP_TOL: f64 = 1e-9;
const MI_CLAMP: f64 = 1e-12;

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a mass vector.
pub fn entropy(mass: &[f64]) -> f64 {
    -mass.iter().map(|&p| plogp(p)).sum::<f64>()
}

pub fn marginal_entropy(joint: &JointTable, axes: &[AxisLabel]) -> Result<f64> {
    Ok(entropy(joint.marginalize(axes)?.mass()))
}

/// `sum p log(p / q)`; infinite at the first cell with `p > 0 = q`, whose
/// index is returned alongside.
pub fn kl_mass(p: &[f64], q: &[f64]) -> (f64, Option<usize>) {
    let mut total = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return (f64::INFINITY, Some(i));
            }
            total += a * (a / b).log2();
        }
    }
    (total, None)
}

fn same_shape(p: &JointTable, q: &JointTable) -> Result<()> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", p.shape(), q.shape())));
    }
    Ok(())
}

pub fn kl(p: &JointTable, q: &JointTable) -> Result<f64> {
    Ok(kl_with_witness(p, q)?.0)
}

pub fn kl_with_witness(p: &JointTable, q: &JointTable) -> Result<(f64, Option<usize>)> {
    same_shape(p, q)?;
    Ok(kl_mass(p.mass(), q.mass()))
}

/// L1 distance.
pub fn dvar_mass(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

pub fn dvar(p: &JointTable, q: &JointTable) -> Result<f64> {
    same_shape(p, q)?;
    Ok(dvar_mass(p.mass(), q.mass()))
}

pub fn pinsker_bound(d: f64) -> f64 {
    (2.0 * std::f64::consts::LN_2 * d.max(0.0)).sqrt()
}

fn disjoint(sets: &[&[AxisLabel]]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(l) = a.iter().find(|l| b.contains(l)) {
                return Err(Error::InvalidAxis(format!("axis {l} appears in two argument sets")));
            }
        }
    }
    Ok(())
}

/// `I(A ; B | C)` from entropies.
pub fn cond_mutual_info(
    joint: &JointTable,
    a: &[AxisLabel],
    b: &[AxisLabel],
    c: &[AxisLabel],
) -> Result<f64> {
    disjoint(&[a, b, c])?;
    let cat = |parts: &[&[AxisLabel]]| parts.concat();
    let h_ac = marginal_entropy(joint, &cat(&[a, c]))?;
    let h_bc = marginal_entropy(joint, &cat(&[b, c]))?;
    let h_abc = marginal_entropy(joint, &cat(&[a, b, c]))?;
    let h_c = marginal_entropy(joint, c)?;
    let mi = h_ac + h_bc - h_abc - h_c;
    Ok(if mi < 0.0 && mi >= -MI_CLAMP { 0.0 } else { mi })
}

/// Query and response axes of each party, taken from the game.
struct PartyAxes {
    queries: Vec<AxisLabel>,
    responses: Vec<AxisLabel>,
}

impl PartyAxes {
    fn of(joint: &JointTable, game: &Game) -> Result<Self> {
        let queries = game.query_shape().labels().to_vec();
        let responses = game.response_shape().labels().to_vec();
        for (labels, shape) in [(&queries, game.query_shape()), (&responses, game.response_shape())] {
            for (l, &size) in labels.iter().zip(shape.sizes()) {
                match joint.shape().axis_of(l) {
                    Some(ax) if joint.shape().sizes()[ax] == size => {}
                    _ => {
                        return Err(Error::ShapeMismatch(format!(
                            "joint over {} lacks game axis {l} of size {size}",
                            joint.shape()
                        )))
                    }
                }
            }
        }
        if joint.shape().rank() != queries.len() + responses.len() {
            return Err(Error::ShapeMismatch(format!(
                "joint over {} has axes beyond the game's",
                joint.shape()
            )));
        }
        Ok(PartyAxes { queries, responses })
    }

    fn pick(labels: &[AxisLabel], set: PartySet) -> Vec<AxisLabel> {
        set.members().iter().map(|&i| labels[i]).collect()
    }
}

/// Gap of one subset: `I(U_A ; X_{A^c} | X_A) + D(P_X~ || P_X)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetGap {
    pub subset: PartySet,
    pub mutual_info: f64,
    pub query_divergence: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxNsReport {
    pub gaps: Vec<SubsetGap>,
    pub max_gap: f64,
    pub delta: f64,
    pub passes: bool,
}

/// `D(P_X~ || P_X)` for a joint over the game's axes.
pub fn query_divergence(joint: &JointTable, game: &Game) -> Result<f64> {
    let axes = PartyAxes::of(joint, game)?;
    let qx = joint.marginalize(&axes.queries)?;
    Ok(kl_mass(qx.mass(), game.query().mass()).0)
}

pub fn approx_ns_check(joint: &JointTable, game: &Game, delta: f64) -> Result<ApproxNsReport> {
    let axes = PartyAxes::of(joint, game)?;
    let qx = joint.marginalize(&axes.queries)?;
    let div = kl_mass(qx.mass(), game.query().mass()).0;
    let m = game.parties();
    let mut gaps = Vec::new();
    for a in proper_subsets(m) {
        let ua = PartyAxes::pick(&axes.responses, a);
        let xa = PartyAxes::pick(&axes.queries, a);
        let xc = PartyAxes::pick(&axes.queries, a.complement(m));
        let mi = cond_mutual_info(joint, &ua, &xc, &xa)?;
        gaps.push(SubsetGap { subset: a, mutual_info: mi, query_divergence: div, gap: mi + div });
    }
    let max_gap = gaps.iter().map(|g| g.gap).fold(0.0, f64::max);
    Ok(ApproxNsReport { gaps, max_gap, delta, passes: max_gap <= delta + GAP_TOL })
}

/// Both sides of
/// `D(P_{U_A X~} || P_X P_{U_A|X~_A}) = I(U_A ; X~_{A^c} | X~_A) + D(P_X~ || P_X)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceIdentity {
    pub lhs: f64,
    pub rhs: f64,
    /// Flat `x_A` cells with zero mass, where `P_{U_A|X_A}` is undefined.
    pub undefined: Vec<usize>,
}

pub fn combined_divergence_identity(
    joint: &JointTable,
    game: &Game,
    a: PartySet,
) -> Result<DivergenceIdentity> {
    let m = game.parties();
    if a.is_empty() || a == PartySet::full(m) || a.members().iter().any(|&i| i >= m) {
        return Err(Error::InvalidArgument(format!("{a} is not a proper nonempty subset")));
    }
    let axes = PartyAxes::of(joint, game)?;
    let ua = PartyAxes::pick(&axes.responses, a);
    let xa = PartyAxes::pick(&axes.queries, a);
    let xc = PartyAxes::pick(&axes.queries, a.complement(m));

    let keep: Vec<AxisLabel> = axes.queries.iter().chain(&ua).copied().collect();
    let p_xu = joint.marginalize(&keep)?;
    let local: Vec<AxisLabel> = xa.iter().chain(&ua).copied().collect();
    let p_local = joint.marginalize(&local)?;
    let cond = p_local.condition(&xa)?;
    let xa_of = p_xu.shape().projection_map(&xa)?;
    let ua_of = p_xu.shape().projection_map(&ua)?;
    let n_ua = cond.channel.output().len();
    let px = game.query().mass();

    let mut lhs = 0.0;
    for (cell, &p) in p_xu.mass().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let x = cell / n_ua;
        let q = px[x] * cond.channel.get(xa_of[cell], ua_of[cell]);
        if q <= 0.0 {
            lhs = f64::INFINITY;
            break;
        }
        lhs += p * (p / q).log2();
    }
    let mi = cond_mutual_info(joint, &ua, &xc, &xa)?;
    let div = query_divergence(joint, game)?;
    Ok(DivergenceIdentity { lhs, rhs: mi + div, undefined: cond.undefined })
}
