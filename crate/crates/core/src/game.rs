//! Multiprover games, builtin examples, and repeated games.

use std::fmt;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::tensor::{AlphabetShape, AxisLabel, ExactTable, JointTable, Normalization, Role, MASS_TOL};

/// Default cap on the number of (query, response) cells of a game table.
pub const DEFAULT_BUDGET_CELLS: usize = 10_000_000;

pub const BUILTIN_NAMES: [&str; 5] = [
    "chsh",
    "anticorrelation",
    "anticorrelation_literal",
    "constant_win",
    "constant_lose",
];

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TooFewParties { parties: usize },
    PartyCountMismatch { queries: usize, responses: usize },
    EmptyAlphabet { axis: String },
    QueryLength { expected: usize, found: usize },
    PredicateLength { expected: usize, found: usize },
    NegativeMass { cell: usize, value: f64 },
    QueryNotNormalized { total: f64 },
    NonBinaryPredicate { cell: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewParties { parties } => write!(f, "{parties} parties, need at least 2"),
            Violation::PartyCountMismatch { queries, responses } => {
                write!(f, "{queries} query alphabets but {responses} response alphabets")
            }
            Violation::EmptyAlphabet { axis } => write!(f, "alphabet {axis} is empty"),
            Violation::QueryLength { expected, found } => {
                write!(f, "query has {found} cells, expected {expected}")
            }
            Violation::PredicateLength { expected, found } => {
                write!(f, "predicate has {found} cells, expected {expected}")
            }
            Violation::NegativeMass { cell, value } => {
                write!(f, "query cell {cell} has invalid mass {value}")
            }
            Violation::QueryNotNormalized { total } => {
                write!(f, "query masses sum to {total}, not 1")
            }
            Violation::NonBinaryPredicate { cell, value } => {
                write!(f, "predicate cell {cell} is {value}, not 0 or 1")
            }
        }
    }
}

/// Unchecked game description; [`GameSpec::validate`] turns it into a [`Game`].
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    pub name: String,
    pub query_sizes: Vec<usize>,
    pub response_sizes: Vec<usize>,
    /// Flat query masses over the query alphabets.
    pub query: Vec<f64>,
    /// Optional exact masses; when present they take precedence over `query`.
    pub exact_query: Option<Vec<BigRational>>,
    /// Flat 0/1 table over (query, response), query-major.
    pub predicate: Vec<f64>,
}

impl GameSpec {
    pub fn validate(self) -> std::result::Result<Game, Vec<Violation>> {
        let mut violations = Vec::new();
        let m = self.query_sizes.len();
        if m < 2 {
            violations.push(Violation::TooFewParties { parties: m });
        }
        if self.response_sizes.len() != m {
            violations.push(Violation::PartyCountMismatch {
                queries: m,
                responses: self.response_sizes.len(),
            });
        }
        for (i, &s) in self.query_sizes.iter().enumerate() {
            if s == 0 {
                violations.push(Violation::EmptyAlphabet { axis: format!("x{i}") });
            }
        }
        for (i, &s) in self.response_sizes.iter().enumerate() {
            if s == 0 {
                violations.push(Violation::EmptyAlphabet { axis: format!("u{i}") });
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        let nx: usize = self.query_sizes.iter().product();
        let nu: usize = self.response_sizes.iter().product();

        let query: Vec<f64> = match &self.exact_query {
            Some(ex) => ex.iter().map(|m| m.to_f64().unwrap_or(f64::NAN)).collect(),
            None => self.query.clone(),
        };
        if query.len() != nx {
            violations.push(Violation::QueryLength { expected: nx, found: query.len() });
        } else {
            for (cell, &v) in query.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    violations.push(Violation::NegativeMass { cell, value: v });
                }
            }
            let total_ok = match &self.exact_query {
                Some(ex) => ex.iter().fold(BigRational::zero(), |a, b| a + b) == BigRational::one(),
                None => (query.iter().sum::<f64>() - 1.0).abs() <= MASS_TOL,
            };
            if !total_ok {
                violations.push(Violation::QueryNotNormalized { total: query.iter().sum() });
            }
        }
        if self.predicate.len() != nx * nu {
            violations.push(Violation::PredicateLength {
                expected: nx * nu,
                found: self.predicate.len(),
            });
        } else {
            for (cell, &v) in self.predicate.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    violations.push(Violation::NonBinaryPredicate { cell, value: v });
                }
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }

        let qshape = AlphabetShape::parties(Role::Query, &self.query_sizes)
            .map_err(|e| vec![Violation::EmptyAlphabet { axis: e.to_string() }])?;
        let rshape = AlphabetShape::parties(Role::Response, &self.response_sizes)
            .map_err(|e| vec![Violation::EmptyAlphabet { axis: e.to_string() }])?;
        let query_table = JointTable::new(qshape.clone(), query, Normalization::Distribution)
            .map_err(|_| vec![Violation::QueryNotNormalized { total: f64::NAN }])?;
        let exact = self
            .exact_query
            .map(|ex| ExactTable::new(qshape, ex))
            .transpose()
            .map_err(|_| vec![Violation::QueryNotNormalized { total: f64::NAN }])?;
        Ok(Game {
            name: self.name,
            query: query_table,
            exact_query: exact,
            responses: rshape,
            predicate: self.predicate.iter().map(|&v| v as u8).collect(),
        })
    }
}

/// A validated game `(P_X, omega)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    name: String,
    query: JointTable,
    exact_query: Option<ExactTable>,
    responses: AlphabetShape,
    predicate: Vec<u8>,
}

impl Game {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parties(&self) -> usize {
        self.query.shape().rank()
    }

    pub fn query(&self) -> &JointTable {
        &self.query
    }

    pub fn exact_query(&self) -> Option<&ExactTable> {
        self.exact_query.as_ref()
    }

    pub fn query_shape(&self) -> &AlphabetShape {
        self.query.shape()
    }

    pub fn response_shape(&self) -> &AlphabetShape {
        &self.responses
    }

    pub fn query_sizes(&self) -> &[usize] {
        self.query.shape().sizes()
    }

    pub fn response_sizes(&self) -> &[usize] {
        self.responses.sizes()
    }

    pub fn num_queries(&self) -> usize {
        self.query.shape().len()
    }

    pub fn num_responses(&self) -> usize {
        self.responses.len()
    }

    /// Shape of joint tables over (queries, responses).
    pub fn joint_shape(&self) -> AlphabetShape {
        self.query
            .shape()
            .concat(&self.responses)
            .expect("query and response labels are disjoint")
    }

    pub fn predicate(&self) -> &[u8] {
        &self.predicate
    }

    pub fn omega(&self, x: usize, u: usize) -> u8 {
        self.predicate[x * self.num_responses() + u]
    }

    pub fn query_prob(&self, x: usize) -> f64 {
        self.query.mass()[x]
    }

    /// Query-major weights `P_X(x) * omega(x, u)`.
    pub fn win_weights(&self) -> Vec<f64> {
        let nu = self.num_responses();
        self.predicate
            .iter()
            .enumerate()
            .map(|(c, &w)| if w == 1 { self.query_prob(c / nu) } else { 0.0 })
            .collect()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn spec(&self) -> GameSpec {
        GameSpec {
            name: self.name.clone(),
            query_sizes: self.query_sizes().to_vec(),
            response_sizes: self.response_sizes().to_vec(),
            query: self.query.mass().to_vec(),
            exact_query: self.exact_query.as_ref().map(|e| e.mass().to_vec()),
            predicate: self.predicate.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Builds a game on binary alphabets from a predicate closure and exact
/// query weights.
fn binary_game(
    name: &str,
    m: usize,
    query: Vec<BigRational>,
    predicate: impl Fn(&[usize], &[usize]) -> bool,
) -> Game {
    let sizes = vec![2; m];
    let shape = AlphabetShape::parties(Role::Query, &sizes).expect("binary shape");
    let nx = shape.len();
    let mut pred = Vec::with_capacity(nx * nx);
    for x in 0..nx {
        let xs = shape.unflatten(x);
        for u in 0..nx {
            let us = shape.unflatten(u);
            pred.push(if predicate(&xs, &us) { 1.0 } else { 0.0 });
        }
    }
    GameSpec {
        name: name.to_string(),
        query_sizes: sizes.clone(),
        response_sizes: sizes,
        query: Vec::new(),
        exact_query: Some(query),
        predicate: pred,
    }
    .validate()
    .expect("builtin games are valid")
}

fn uniform_binary(m: usize) -> Vec<BigRational> {
    let n = 1i64 << m;
    vec![ratio(1, n); n as usize]
}

/// Weight-2 strings over three bits, each with mass 1/3.
fn weight_two_query() -> Vec<BigRational> {
    (0..8u32)
        .map(|x| if x.count_ones() == 2 { ratio(1, 3) } else { BigRational::zero() })
        .collect()
}

pub fn chsh() -> Game {
    binary_game("chsh", 2, uniform_binary(2), |x, u| (u[0] ^ u[1]) == (x[0] & x[1]))
}

/// Three provers answer with bits; the two queried with 1 must disagree.
pub fn anticorrelation() -> Game {
    binary_game("anticorrelation", 3, weight_two_query(), |x, u| {
        let ones: Vec<usize> = (0..3).filter(|&i| x[i] == 1).collect();
        ones.len() == 2 && u[ones[0]] != u[ones[1]]
    })
}

/// Same query distribution, but the two queried-with-1 provers must agree.
pub fn anticorrelation_literal() -> Game {
    binary_game("anticorrelation_literal", 3, weight_two_query(), |x, u| {
        let ones: Vec<usize> = (0..3).filter(|&i| x[i] == 1).collect();
        ones.len() == 2 && u[ones[0]] == u[ones[1]]
    })
}

pub fn constant_win() -> Game {
    binary_game("constant_win", 2, uniform_binary(2), |_, _| true)
}

pub fn constant_lose() -> Game {
    binary_game("constant_lose", 2, uniform_binary(2), |_, _| false)
}

pub fn builtin(name: &str) -> Result<Game> {
    match name {
        "chsh" => Ok(chsh()),
        "anticorrelation" => Ok(anticorrelation()),
        "anticorrelation_literal" => Ok(anticorrelation_literal()),
        "constant_win" => Ok(constant_win()),
        "constant_lose" => Ok(constant_lose()),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

/// `n` parallel copies of a base game.
///
/// The repeated game is itself a [`Game`] whose party `i` letter is the
/// tuple `(x_{i,1}, .., x_{i,n})` flattened row-major (coordinate 1 most
/// significant); parties are then concatenated. Its predicate is the
/// all-coordinates-win predicate, and `wins` records the number of winning
/// coordinates per (query, response) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RepeatedGame {
    base: Game,
    n: usize,
    game: Game,
    wins: Vec<u8>,
    base_x: Vec<usize>,
    base_u: Vec<usize>,
}

fn pow_checked(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// For each repeated flat index, the `n` base flat indices (one per
/// coordinate), stored contiguously.
fn coordinate_indices(sizes: &[usize], n: usize) -> Vec<usize> {
    let base = AlphabetShape::parties(Role::Query, sizes).expect("valid sizes");
    let rep_sizes: Vec<usize> = sizes.iter().map(|&s| s.pow(n as u32)).collect();
    let rep = AlphabetShape::parties(Role::Query, &rep_sizes).expect("valid sizes");
    let mut out = Vec::with_capacity(rep.len() * n);
    let mut letters = vec![0usize; sizes.len()];
    for flat in 0..rep.len() {
        let tuple = rep.unflatten(flat);
        for j in 0..n {
            for (i, &t) in tuple.iter().enumerate() {
                // Coordinate j of party i's letter, coordinate 0 most significant.
                letters[i] = (t / sizes[i].pow((n - 1 - j) as u32)) % sizes[i];
            }
            out.push(base.flatten(&letters));
        }
    }
    out
}

pub fn tensor_power(game: &Game, n: usize, budget_cells: usize) -> Result<RepeatedGame> {
    if n == 0 {
        return Err(Error::InvalidArgument("repetition count must be positive".into()));
    }
    let too_big = || Error::Budget {
        what: format!("{}^{n} game table", game.name()),
        cells: (game.num_queries() as u128 * game.num_responses() as u128)
            .saturating_pow(n as u32),
        budget: budget_cells as u128,
    };
    let nx = pow_checked(game.num_queries(), n).ok_or_else(too_big)?;
    let nu = pow_checked(game.num_responses(), n).ok_or_else(too_big)?;
    let cells = nx.checked_mul(nu).ok_or_else(too_big)?;
    if cells > budget_cells {
        return Err(too_big());
    }

    let base_x = coordinate_indices(game.query_sizes(), n);
    let base_u = coordinate_indices(game.response_sizes(), n);
    let base_nu = game.num_responses();

    let mut query = Vec::with_capacity(nx);
    for x in 0..nx {
        query.push(base_x[x * n..(x + 1) * n].iter().map(|&b| game.query_prob(b)).product());
    }
    let exact = game.exact_query().map(|ex| {
        (0..nx)
            .map(|x| {
                base_x[x * n..(x + 1) * n]
                    .iter()
                    .fold(BigRational::one(), |acc, &b| acc * &ex.mass()[b])
            })
            .collect::<Vec<_>>()
    });
    let mut wins = Vec::with_capacity(cells);
    for x in 0..nx {
        let bx = &base_x[x * n..(x + 1) * n];
        for u in 0..nu {
            let bu = &base_u[u * n..(u + 1) * n];
            let w: u8 = bx
                .iter()
                .zip(bu)
                .map(|(&a, &b)| game.predicate()[a * base_nu + b])
                .sum();
            wins.push(w);
        }
    }
    let predicate = wins.iter().map(|&w| if w as usize == n { 1.0 } else { 0.0 }).collect();
    let spec = GameSpec {
        name: format!("{}^{n}", game.name()),
        query_sizes: game.query_sizes().iter().map(|&s| s.pow(n as u32)).collect(),
        response_sizes: game.response_sizes().iter().map(|&s| s.pow(n as u32)).collect(),
        query,
        exact_query: exact,
        predicate,
    };
    let repeated = spec.validate().map_err(Error::InvalidGame)?;
    Ok(RepeatedGame { base: game.clone(), n, game: repeated, wins, base_x, base_u })
}

impl RepeatedGame {
    pub fn base(&self) -> &Game {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The repeated game viewed as a single game with the all-win predicate.
    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn wins(&self) -> &[u8] {
        &self.wins
    }

    /// Number of coordinates won at flat repeated query `x`, response `u`.
    pub fn win_count(&self, x: usize, u: usize) -> usize {
        self.wins[x * self.game.num_responses() + u] as usize
    }

    /// Base query index of coordinate `j` of repeated query `x`.
    pub fn base_query(&self, x: usize, j: usize) -> usize {
        self.base_x[x * self.n + j]
    }

    pub fn base_response(&self, u: usize, j: usize) -> usize {
        self.base_u[u * self.n + j]
    }

    fn encode(&self, per_coord: &[Vec<usize>], sizes: &[usize]) -> Result<usize> {
        if per_coord.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates given for an {}-fold game",
                per_coord.len(),
                self.n
            )));
        }
        let mut flat = 0usize;
        for (i, &s) in sizes.iter().enumerate() {
            let mut letter = 0usize;
            for coord in per_coord {
                let v = *coord.get(i).ok_or_else(|| {
                    Error::ShapeMismatch("coordinate tuple shorter than party count".into())
                })?;
                if v >= s {
                    return Err(Error::ShapeMismatch(format!("letter {v} outside alphabet of size {s}")));
                }
                letter = letter * s + v;
            }
            flat = flat * s.pow(self.n as u32) + letter;
        }
        Ok(flat)
    }

    /// Flat repeated query from `per_coord[j][i]` = party `i`'s letter in
    /// coordinate `j`.
    pub fn query_index(&self, per_coord: &[Vec<usize>]) -> Result<usize> {
        self.encode(per_coord, self.base.query_sizes())
    }

    pub fn response_index(&self, per_coord: &[Vec<usize>]) -> Result<usize> {
        self.encode(per_coord, self.base.response_sizes())
    }

    /// Indicator over (query, response) cells of `N_omega >= n * delta`.
    pub fn threshold_event(&self, delta: f64) -> Result<Vec<u8>> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("threshold {delta} outside (0, 1]")));
        }
        let need = self.n as f64 * delta;
        Ok(self.wins.iter().map(|&w| u8::from(f64::from(w) >= need)).collect())
    }

    /// Labels for the per-coordinate view of a joint over the repeated game:
    /// party-major, coordinate-minor queries, then responses likewise.
    pub fn coordinate_labels(&self) -> Vec<AxisLabel> {
        let m = self.base.parties();
        let mut labels = Vec::with_capacity(2 * m * self.n);
        for i in 0..m {
            for j in 0..self.n {
                labels.push(AxisLabel::query_at(i, j));
            }
        }
        for i in 0..m {
            for j in 0..self.n {
                labels.push(AxisLabel::response_at(i, j));
            }
        }
        labels
    }

    /// Shape splitting every party letter into its `n` coordinates.
    pub fn coordinate_shape(&self) -> AlphabetShape {
        let m = self.base.parties();
        let mut sizes = Vec::with_capacity(2 * m * self.n);
        for i in 0..m {
            sizes.extend(std::iter::repeat_n(self.base.query_sizes()[i], self.n));
        }
        for i in 0..m {
            sizes.extend(std::iter::repeat_n(self.base.response_sizes()[i], self.n));
        }
        AlphabetShape::new(self.coordinate_labels().into_iter().zip(sizes))
            .expect("distinct labels")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            let g = builtin(name).unwrap();
            assert_eq!(g.name(), name);
            assert!(g.exact_query().is_some());
        }
        assert!(matches!(builtin("nope"), Err(Error::UnknownBuiltin(_))));
    }

    #[test]
    fn chsh_definition() {
        let g = chsh();
        assert_eq!(g.parties(), 2);
        assert!(g.query().mass().iter().all(|&p| p == 0.25));
        // x = (1, 1), u = (0, 1): 0 xor 1 = 1 = 1 and 1
        let x = g.query_shape().flatten(&[1, 1]);
        let u = g.response_shape().flatten(&[0, 1]);
        assert_eq!(g.omega(x, u), 1);
        assert_eq!(g.omega(x, g.response_shape().flatten(&[1, 1])), 0);
    }

    #[test]
    fn anticorrelation_definition() {
        let g = anticorrelation();
        assert_eq!(g.parties(), 3);
        let support: Vec<usize> =
            (0..8).filter(|&x| g.query_prob(x) > 0.0).collect();
        assert_eq!(support, vec![3, 5, 6]);
        // x = (1, 1, 0): provers 0 and 1 must disagree; prover 2 is free.
        let x = g.query_shape().flatten(&[1, 1, 0]);
        assert_eq!(g.omega(x, g.response_shape().flatten(&[0, 1, 0])), 1);
        assert_eq!(g.omega(x, g.response_shape().flatten(&[0, 1, 1])), 1);
        assert_eq!(g.omega(x, g.response_shape().flatten(&[1, 1, 0])), 0);
        let lit = anticorrelation_literal();
        assert_eq!(lit.omega(x, lit.response_shape().flatten(&[1, 1, 0])), 1);
    }

    fn chsh_spec() -> GameSpec {
        let mut s = chsh().spec();
        s.exact_query = None;
        s
    }

    #[test]
    fn scaled_query_is_a_normalization_violation() {
        let mut s = chsh_spec();
        s.query.iter_mut().for_each(|q| *q *= 0.9);
        let v = s.validate().unwrap_err();
        assert!(matches!(v[0], Violation::QueryNotNormalized { .. }));
    }

    #[test]
    fn fractional_predicate_is_a_binary_violation() {
        let mut s = chsh_spec();
        s.predicate[5] = 0.5;
        let v = s.validate().unwrap_err();
        assert_eq!(v, vec![Violation::NonBinaryPredicate { cell: 5, value: 0.5 }]);
    }

    #[test]
    fn single_party_rejected() {
        let mut s = chsh_spec();
        s.query_sizes = vec![4];
        s.response_sizes = vec![4];
        assert!(matches!(s.validate().unwrap_err()[0], Violation::TooFewParties { .. }));
    }

    #[test]
    fn first_power_is_the_base_game() {
        let g = chsh();
        let rg = tensor_power(&g, 1, DEFAULT_BUDGET_CELLS).unwrap();
        assert_eq!(rg.game().query().mass(), g.query().mass());
        assert_eq!(rg.game().predicate(), g.predicate());
    }

    #[test]
    fn chsh_square_is_uniform() {
        let rg = tensor_power(&chsh(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        assert_eq!(rg.game().num_queries(), 16);
        assert!(rg.game().query().mass().iter().all(|&p| p == 1.0 / 16.0));
    }

    #[test]
    fn anticorrelation_square_support() {
        let rg = tensor_power(&anticorrelation(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        let support: Vec<f64> =
            rg.game().query().mass().iter().copied().filter(|&p| p > 0.0).collect();
        assert_eq!(support.len(), 9);
        assert!(support.iter().all(|&p| (p - 1.0 / 9.0).abs() < 1e-15));
        let exact = rg.game().exact_query().unwrap();
        assert_eq!(exact.mass().iter().filter(|m| !m.is_zero()).count(), 9);
        assert_eq!(exact.total(), BigRational::one());
    }

    #[test]
    fn budget_error_names_cell_count() {
        let err = tensor_power(&anticorrelation(), 3, 1000).unwrap_err();
        match err {
            Error::Budget { cells, budget, .. } => {
                assert_eq!(cells, 64u128.pow(3));
                assert_eq!(budget, 1000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chsh_two_coordinate_win_count() {
        let rg = tensor_power(&chsh(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        let x = rg.query_index(&[vec![0, 0], vec![1, 1]]).unwrap();
        let u = rg.response_index(&[vec![0, 0], vec![0, 0]]).unwrap();
        // Coordinate 1: 0^0 = 0&0 wins; coordinate 2: 0^0 != 1&1 loses.
        assert_eq!(rg.win_count(x, u), 1);
    }

    #[test]
    fn constant_games_win_counts() {
        let rg = tensor_power(&constant_win(), 3, DEFAULT_BUDGET_CELLS).unwrap();
        assert!(rg.wins().iter().all(|&w| w == 3));
        let rg = tensor_power(&constant_lose(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        assert!(rg.wins().iter().all(|&w| w == 0));
    }

    #[test]
    fn threshold_events() {
        let rg = tensor_power(&chsh(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        let all = rg.threshold_event(1.0).unwrap();
        let and: Vec<u8> = rg.game().predicate().to_vec();
        assert_eq!(all, and);
        let tiny = rg.threshold_event(1e-9).unwrap();
        assert!(tiny.iter().zip(rg.wins()).all(|(&e, &w)| e == u8::from(w >= 1)));
        let half = rg.threshold_event(0.5).unwrap();
        assert!(half.iter().zip(rg.wins()).all(|(&e, &w)| e == u8::from(w >= 1)));
        assert!(rg.threshold_event(0.0).is_err());
        assert!(rg.threshold_event(1.5).is_err());
        let lose = tensor_power(&constant_lose(), 2, DEFAULT_BUDGET_CELLS).unwrap();
        assert!(lose.threshold_event(1e-9).unwrap().iter().all(|&e| e == 0));
    }

    #[test]
    fn coordinate_view_matches_super_letters() {
        let g = anticorrelation();
        let rg = tensor_power(&g, 2, DEFAULT_BUDGET_CELLS).unwrap();
        let shape = rg.coordinate_shape();
        let nu = rg.game().num_responses();
        for flat in [0usize, 77, 1234, 4095] {
            let (x, u) = (flat / nu, flat % nu);
            let idx = shape.unflatten(flat);
            for j in 0..2 {
                let bx: Vec<usize> = (0..3).map(|i| idx[i * 2 + j]).collect();
                let bu: Vec<usize> = (0..3).map(|i| idx[6 + i * 2 + j]).collect();
                assert_eq!(rg.base_query(x, j), g.query_shape().flatten(&bx));
                assert_eq!(rg.base_response(u, j), g.response_shape().flatten(&bu));
            }
        }
    }
}
