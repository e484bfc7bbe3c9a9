//! Dense nonnegative tables over labelled product alphabets.
//!
//! Every table is stored flat in row-major order over its declared axis
//! order: for axes with sizes `(s_1, .., s_k)` the cell `(a_1, .., a_k)` lives
//! at `((a_1 * s_2 + a_2) * s_3 + ..) * s_k + a_k`.

use std::fmt;

use num::{BigRational, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on normalization sums.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Query,
    Response,
}

/// Tag identifying one axis: a party's query or response, optionally for a
/// single coordinate of a repeated game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AxisLabel {
    pub role: Role,
    pub party: u16,
    pub coord: Option<u16>,
}

impl AxisLabel {
    pub fn query(party: usize) -> Self {
        Self { role: Role::Query, party: party as u16, coord: None }
    }

    pub fn response(party: usize) -> Self {
        Self { role: Role::Response, party: party as u16, coord: None }
    }

    pub fn query_at(party: usize, coord: usize) -> Self {
        Self { role: Role::Query, party: party as u16, coord: Some(coord as u16) }
    }

    pub fn response_at(party: usize, coord: usize) -> Self {
        Self { role: Role::Response, party: party as u16, coord: Some(coord as u16) }
    }

    pub fn without_coord(self) -> Self {
        Self { coord: None, ..self }
    }
}

impl fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = match self.role {
            Role::Query => 'x',
            Role::Response => 'u',
        };
        match self.coord {
            Some(c) => write!(f, "{r}{}@{c}", self.party),
            None => write!(f, "{r}{}", self.party),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlphabetShape {
    labels: Vec<AxisLabel>,
    sizes: Vec<usize>,
    len: usize,
}

impl AlphabetShape {
    pub fn new(axes: impl IntoIterator<Item = (AxisLabel, usize)>) -> Result<Self> {
        let (labels, sizes): (Vec<_>, Vec<_>) = axes.into_iter().unzip();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidAxis(format!("duplicate axis label {l}")));
            }
        }
        let mut len = 1usize;
        for (l, &s) in labels.iter().zip(&sizes) {
            if s == 0 {
                return Err(Error::InvalidAxis(format!("axis {l} has size 0")));
            }
            len = len.checked_mul(s).ok_or_else(|| Error::Budget {
                what: "alphabet".into(),
                cells: u128::MAX,
                budget: usize::MAX as u128,
            })?;
        }
        Ok(Self { labels, sizes, len })
    }

    /// Scalar shape with no axes and a single cell.
    pub fn scalar() -> Self {
        Self { labels: Vec::new(), sizes: Vec::new(), len: 1 }
    }

    /// One axis per party with the given role.
    pub fn parties(role: Role, sizes: &[usize]) -> Result<Self> {
        Self::new(sizes.iter().enumerate().map(|(p, &s)| {
            (AxisLabel { role, party: p as u16, coord: None }, s)
        }))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn labels(&self) -> &[AxisLabel] {
        &self.labels
    }

    pub fn axis_of(&self, label: &AxisLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn require_axis(&self, label: &AxisLabel) -> Result<usize> {
        self.axis_of(label)
            .ok_or_else(|| Error::InvalidAxis(format!("no axis {label} in shape {self}")))
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.rank()];
        for k in (0..self.rank().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.sizes[k + 1];
        }
        strides
    }

    pub fn flatten(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.rank());
        index
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.rank()];
        for k in (0..self.rank()).rev() {
            out[k] = flat % self.sizes[k];
            flat /= self.sizes[k];
        }
        out
    }

    pub fn concat(&self, other: &AlphabetShape) -> Result<Self> {
        Self::new(
            self.labels
                .iter()
                .chain(&other.labels)
                .copied()
                .zip(self.sizes.iter().chain(&other.sizes).copied()),
        )
    }

    /// Sub-shape made of the given axes, in the given order.
    pub fn select(&self, keep: &[AxisLabel]) -> Result<Self> {
        let mut axes = Vec::with_capacity(keep.len());
        for l in keep {
            axes.push((*l, self.sizes[self.require_axis(l)?]));
        }
        Self::new(axes)
    }

    /// Same sizes, new labels.
    pub fn relabel(&self, labels: Vec<AxisLabel>) -> Result<Self> {
        if labels.len() != self.rank() {
            return Err(Error::ShapeMismatch(format!(
                "relabel with {} labels on a rank-{} shape",
                labels.len(),
                self.rank()
            )));
        }
        Self::new(labels.into_iter().zip(self.sizes.iter().copied()))
    }

    /// For every cell of `self`, the flat index of its projection onto
    /// `keep` (ordered as in `keep`).
    pub fn projection_map(&self, keep: &[AxisLabel]) -> Result<Vec<usize>> {
        let target = self.select(keep)?;
        let tstrides = target.strides();
        let mut contrib = vec![0usize; self.rank()];
        for (k, l) in keep.iter().enumerate() {
            contrib[self.require_axis(l)?] = tstrides[k];
        }
        let mut map = Vec::with_capacity(self.len);
        let mut idx = vec![0usize; self.rank()];
        let mut t = 0usize;
        for _ in 0..self.len {
            map.push(t);
            for k in (0..self.rank()).rev() {
                idx[k] += 1;
                t += contrib[k];
                if idx[k] < self.sizes[k] {
                    break;
                }
                t -= contrib[k] * self.sizes[k];
                idx[k] = 0;
            }
        }
        Ok(map)
    }
}

impl fmt::Display for AlphabetShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (l, s)) in self.labels.iter().zip(&self.sizes).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}:{s}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Distribution,
    Subnormalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    shape: AlphabetShape,
    mass: Vec<f64>,
    norm: Normalization,
}

fn check_masses(mass: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (cell, &v) in mass.iter().enumerate() {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidMass { cell, value: v });
        }
        total += v;
    }
    Ok(total)
}

impl JointTable {
    pub fn new(shape: AlphabetShape, mass: Vec<f64>, norm: Normalization) -> Result<Self> {
        if mass.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} masses for shape {shape} with {} cells",
                mass.len(),
                shape.len()
            )));
        }
        let total = check_masses(&mass)?;
        let ok = match norm {
            Normalization::Distribution => (total - 1.0).abs() <= MASS_TOL,
            Normalization::Subnormalized => total <= 1.0 + MASS_TOL,
        };
        if !ok {
            return Err(Error::NotNormalized {
                kind: match norm {
                    Normalization::Distribution => "distribution",
                    Normalization::Subnormalized => "subnormalized table",
                },
                total,
            });
        }
        Ok(Self { shape, mass, norm })
    }

    /// Rescales nonnegative weights to a distribution.
    pub fn from_weights(shape: AlphabetShape, mut weights: Vec<f64>) -> Result<Self> {
        let total = check_masses(&weights)?;
        if total <= 0.0 {
            return Err(Error::NotNormalized { kind: "weight vector", total });
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(shape, weights, Normalization::Distribution)
    }

    pub fn uniform(shape: AlphabetShape) -> Self {
        let p = 1.0 / shape.len() as f64;
        let mass = vec![p; shape.len()];
        Self { shape, mass, norm: Normalization::Distribution }
    }

    pub fn point_mass(shape: AlphabetShape, cell: usize) -> Result<Self> {
        if cell >= shape.len() {
            return Err(Error::ShapeMismatch(format!("cell {cell} outside {shape}")));
        }
        let mut mass = vec![0.0; shape.len()];
        mass[cell] = 1.0;
        Ok(Self { shape, mass, norm: Normalization::Distribution })
    }

    pub fn shape(&self) -> &AlphabetShape {
        &self.shape
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.mass[self.shape.flatten(index)]
    }

    /// Sums out every axis not in `keep`; result axes follow `keep`'s order.
    pub fn marginalize(&self, keep: &[AxisLabel]) -> Result<JointTable> {
        let target = self.shape.select(keep)?;
        let map = self.shape.projection_map(keep)?;
        let mut mass = vec![0.0; target.len()];
        for (m, &t) in self.mass.iter().zip(&map) {
            mass[t] += m;
        }
        Ok(JointTable { shape: target, mass, norm: self.norm })
    }

    /// Reorders axes; `order` must name every axis exactly once.
    pub fn permute(&self, order: &[AxisLabel]) -> Result<JointTable> {
        if order.len() != self.shape.rank() {
            return Err(Error::InvalidAxis(format!(
                "permutation names {} of {} axes",
                order.len(),
                self.shape.rank()
            )));
        }
        self.marginalize(order)
    }

    /// Reinterprets the flat storage under another shape with the same cell
    /// count. Merging adjacent axes (or splitting one) this way is exact
    /// because of the row-major convention.
    pub fn reshape(&self, shape: AlphabetShape) -> Result<JointTable> {
        if shape.len() != self.shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {} cells into {shape}",
                self.shape.len()
            )));
        }
        Ok(JointTable { shape, mass: self.mass.clone(), norm: self.norm })
    }

    /// Outer product; axes of `self` come first.
    pub fn product(&self, other: &JointTable) -> Result<JointTable> {
        let shape = self.shape.concat(&other.shape)?;
        let mut mass = Vec::with_capacity(shape.len());
        for a in &self.mass {
            mass.extend(other.mass.iter().map(|b| a * b));
        }
        let norm = if self.norm == Normalization::Distribution
            && other.norm == Normalization::Distribution
        {
            Normalization::Distribution
        } else {
            Normalization::Subnormalized
        };
        Ok(JointTable { shape, mass, norm })
    }

    pub fn scaled(&self, factor: f64) -> Result<JointTable> {
        JointTable::new(
            self.shape.clone(),
            self.mass.iter().map(|m| m * factor).collect(),
            Normalization::Subnormalized,
        )
    }

    /// `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &JointTable, t: f64) -> Result<JointTable> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("mixing tables of different shapes".into()));
        }
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        let norm = if self.norm == other.norm { self.norm } else { Normalization::Subnormalized };
        Ok(JointTable { shape: self.shape.clone(), mass, norm })
    }

    /// Conditional of the non-given axes given `given`. Cells whose
    /// conditioning mass is zero get the uniform conditional and are listed
    /// in [`Conditional::undefined`].
    pub fn condition(&self, given: &[AxisLabel]) -> Result<Conditional> {
        let rest: Vec<AxisLabel> = self
            .shape
            .labels()
            .iter()
            .filter(|l| !given.contains(l))
            .copied()
            .collect();
        let input = self.shape.select(given)?;
        let output = self.shape.select(&rest)?;
        let order: Vec<AxisLabel> = given.iter().chain(&rest).copied().collect();
        let arranged = self.permute(&order)?;
        let nu = output.len();
        let mut mass = arranged.mass;
        let mut undefined = Vec::new();
        for (x, row) in mass.chunks_mut(nu).enumerate() {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / nu as f64);
                undefined.push(x);
            }
        }
        Ok(Conditional {
            channel: Channel { input, output, mass, kind: ChannelKind::Channel },
            undefined,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conditional {
    pub channel: Channel,
    /// Flat input cells whose conditioning mass was zero.
    pub undefined: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Channel,
    Subchannel,
}

/// Conditional table `P(u | x)`, stored input-major: cell `(x, u)` lives at
/// `x * output.len() + u`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    input: AlphabetShape,
    output: AlphabetShape,
    mass: Vec<f64>,
    kind: ChannelKind,
}

impl Channel {
    pub fn new(
        input: AlphabetShape,
        output: AlphabetShape,
        mass: Vec<f64>,
        kind: ChannelKind,
    ) -> Result<Self> {
        if mass.len() != input.len() * output.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} masses for channel {input} -> {output}",
                mass.len()
            )));
        }
        check_masses(&mass)?;
        for row in mass.chunks(output.len()) {
            let total: f64 = row.iter().sum();
            let ok = match kind {
                ChannelKind::Channel => (total - 1.0).abs() <= MASS_TOL,
                ChannelKind::Subchannel => total <= 1.0 + MASS_TOL,
            };
            if !ok {
                return Err(Error::NotNormalized {
                    kind: match kind {
                        ChannelKind::Channel => "channel row",
                        ChannelKind::Subchannel => "subchannel row",
                    },
                    total,
                });
            }
        }
        Ok(Self { input, output, mass, kind })
    }

    /// Builds a channel from LP output: clamps negatives and, for a
    /// `Channel`, rescales every row to sum to one.
    pub fn from_noisy(
        input: AlphabetShape,
        output: AlphabetShape,
        mut mass: Vec<f64>,
        kind: ChannelKind,
    ) -> Result<Self> {
        let nu = output.len();
        for row in mass.chunks_mut(nu) {
            row.iter_mut().for_each(|v| *v = v.max(0.0));
            let total: f64 = row.iter().sum();
            match kind {
                ChannelKind::Channel if total > 0.0 => row.iter_mut().for_each(|v| *v /= total),
                ChannelKind::Channel => row.iter_mut().for_each(|v| *v = 1.0 / nu as f64),
                ChannelKind::Subchannel if total > 1.0 => {
                    row.iter_mut().for_each(|v| *v /= total)
                }
                ChannelKind::Subchannel => {}
            }
        }
        Self::new(input, output, mass, kind)
    }

    pub fn input(&self) -> &AlphabetShape {
        &self.input
    }

    pub fn output(&self) -> &AlphabetShape {
        &self.output
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn get(&self, x: usize, u: usize) -> f64 {
        self.mass[x * self.output.len() + u]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let nu = self.output.len();
        &self.mass[x * nu..(x + 1) * nu]
    }

    /// Joint `P_X(x) * self(u | x)` with input axes first.
    pub fn joint(&self, input_dist: &JointTable) -> Result<JointTable> {
        if input_dist.shape() != &self.input {
            return Err(Error::ShapeMismatch(format!(
                "input distribution over {} but channel input is {}",
                input_dist.shape(),
                self.input
            )));
        }
        let shape = self.input.concat(&self.output)?;
        let nu = self.output.len();
        let mut mass = Vec::with_capacity(shape.len());
        for (x, px) in input_dist.mass().iter().enumerate() {
            mass.extend(self.mass[x * nu..(x + 1) * nu].iter().map(|p| px * p));
        }
        let norm = if self.kind == ChannelKind::Channel
            && input_dist.normalization() == Normalization::Distribution
        {
            Normalization::Distribution
        } else {
            Normalization::Subnormalized
        };
        JointTable::new(shape, mass, norm)
    }

    /// Channel from the same inputs to the `keep` output axes.
    pub fn marginal_output(&self, keep: &[AxisLabel]) -> Result<Channel> {
        let target = self.output.select(keep)?;
        let map = self.output.projection_map(keep)?;
        let nu = self.output.len();
        let nt = target.len();
        let mut mass = vec![0.0; self.input.len() * nt];
        for x in 0..self.input.len() {
            for (u, &t) in map.iter().enumerate() {
                mass[x * nt + t] += self.mass[x * nu + u];
            }
        }
        Ok(Channel { input: self.input.clone(), output: target, mass, kind: self.kind })
    }

    pub fn scaled(&self, factor: f64) -> Result<Channel> {
        Channel::new(
            self.input.clone(),
            self.output.clone(),
            self.mass.iter().map(|m| m * factor).collect(),
            ChannelKind::Subchannel,
        )
    }

    /// `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &Channel, t: f64) -> Result<Channel> {
        if self.input != other.input || self.output != other.output {
            return Err(Error::ShapeMismatch("mixing channels of different shapes".into()));
        }
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        let kind = if self.kind == other.kind { self.kind } else { ChannelKind::Subchannel };
        Channel::new(self.input.clone(), self.output.clone(), mass, kind)
    }
}

/// Exact-rational mirror of a [`JointTable`], used for query distributions
/// that must survive without binary64 drift.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTable {
    shape: AlphabetShape,
    mass: Vec<BigRational>,
}

impl ExactTable {
    pub fn new(shape: AlphabetShape, mass: Vec<BigRational>) -> Result<Self> {
        if mass.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} masses for shape {shape}",
                mass.len()
            )));
        }
        if let Some(cell) = mass.iter().position(|m| *m < BigRational::zero()) {
            return Err(Error::InvalidMass { cell, value: mass[cell].to_f64().unwrap_or(f64::NAN) });
        }
        Ok(Self { shape, mass })
    }

    pub fn shape(&self) -> &AlphabetShape {
        &self.shape
    }

    pub fn mass(&self) -> &[BigRational] {
        &self.mass
    }

    pub fn total(&self) -> BigRational {
        self.mass.iter().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn product(&self, other: &ExactTable) -> Result<ExactTable> {
        let shape = self.shape.concat(&other.shape)?;
        let mut mass = Vec::with_capacity(shape.len());
        for a in &self.mass {
            mass.extend(other.mass.iter().map(|b| a * b));
        }
        Ok(ExactTable { shape, mass })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m.to_f64().unwrap_or(f64::NAN)).collect()
    }
}
