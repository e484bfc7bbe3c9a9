//! JSON game files with exact rational query masses.

use num::{BigInt, BigRational, Signed, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::game::{Game, GameSpec};
use crate::tensor::AlphabetShape;

const DEFAULT_NAME: &str = "game";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum QueryMasses {
    /// Flat masses in row-major query order.
    Dense { mass: Vec<String> },
    /// `[letters, mass]` pairs; absent queries have mass zero.
    Support { mass: Vec<(Vec<usize>, String)> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Predicate {
    /// Flat 0/1 table over (query, response), query-major.
    Dense(Vec<u8>),
    /// `[query letters, response letters]` of every winning cell.
    Wins(Vec<(Vec<usize>, Vec<usize>)>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub m: usize,
    pub query_alphabets: Vec<usize>,
    pub response_alphabets: Vec<usize>,
    pub query: QueryMasses,
    pub predicate: Predicate,
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.25"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("{s:?} is not a rational number"));
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let whole: BigInt = if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().map_err(|_| bad())? };
        let digits: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num::pow(BigInt::from(10), frac.len());
        let magnitude = whole.abs() * &scale + digits;
        let n = if negative { -magnitude } else { magnitude };
        return Ok(BigRational::new(n, scale));
    }
    Ok(BigRational::from_integer(t.parse().map_err(|_| bad())?))
}

pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn letters_to_flat(shape: &AlphabetShape, letters: &[usize], what: &str) -> Result<usize> {
    if letters.len() != shape.rank() || letters.iter().zip(shape.sizes()).any(|(&l, &s)| l >= s) {
        return Err(Error::Parse(format!("{what} {letters:?} does not fit alphabets {:?}", shape.sizes())));
    }
    Ok(shape.flatten(letters))
}

impl GameFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_game(&self) -> Result<Game> {
        if self.m != self.query_alphabets.len() || self.m != self.response_alphabets.len() {
            return Err(Error::Parse(format!(
                "m = {} but {} query and {} response alphabets",
                self.m,
                self.query_alphabets.len(),
                self.response_alphabets.len()
            )));
        }
        let name = self.name.clone().unwrap_or_else(|| DEFAULT_NAME.to_string());
        let qshape = AlphabetShape::parties(crate::tensor::Role::Query, &self.query_alphabets)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let ushape = AlphabetShape::parties(crate::tensor::Role::Response, &self.response_alphabets)
            .map_err(|e| Error::Parse(e.to_string()))?;
        let (nx, nu) = (qshape.len(), ushape.len());
        let exact: Vec<BigRational> = match &self.query {
            QueryMasses::Dense { mass } => mass.iter().map(|s| parse_rational(s)).collect::<Result<_>>()?,
            QueryMasses::Support { mass } => {
                let mut out = vec![BigRational::zero(); nx];
                for (letters, m) in mass {
                    let x = letters_to_flat(&qshape, letters, "query")?;
                    if !out[x].is_zero() {
                        return Err(Error::Parse(format!("query {letters:?} listed twice")));
                    }
                    out[x] = parse_rational(m)?;
                }
                out
            }
        };
        let predicate: Vec<f64> = match &self.predicate {
            Predicate::Dense(cells) => cells.iter().map(|&v| f64::from(v)).collect(),
            Predicate::Wins(cells) => {
                let mut out = vec![0.0; nx * nu];
                for (xs, us) in cells {
                    let x = letters_to_flat(&qshape, xs, "query")?;
                    let u = letters_to_flat(&ushape, us, "response")?;
                    out[x * nu + u] = 1.0;
                }
                out
            }
        };
        let spec = GameSpec {
            name,
            query_sizes: self.query_alphabets.clone(),
            response_sizes: self.response_alphabets.clone(),
            query: Vec::new(),
            exact_query: Some(exact),
            predicate,
        };
        spec.validate().map_err(Error::InvalidGame)
    }

    /// Canonical file for a game: dense exact masses in lowest terms and a
    /// dense predicate. Floating masses are converted exactly.
    pub fn from_game(game: &Game) -> Result<Self> {
        let mass = match game.exact_query() {
            Some(ex) => ex.mass().iter().map(format_rational).collect(),
            None => {
                let exact: Vec<BigRational> = game
                    .query()
                    .mass()
                    .iter()
                    .map(|&p| {
                        BigRational::from_float(p)
                            .ok_or_else(|| Error::InvalidArgument(format!("query mass {p} is not finite")))
                    })
                    .collect::<Result<_>>()?;
                // Float masses rarely sum to exactly one.
                let total: BigRational = exact.iter().sum();
                exact.iter().map(|r| format_rational(&(r / &total))).collect()
            }
        };
        Ok(GameFile {
            name: Some(game.name().to_string()),
            m: game.parties(),
            query_alphabets: game.query_sizes().to_vec(),
            response_alphabets: game.response_sizes().to_vec(),
            query: QueryMasses::Dense { mass },
            predicate: Predicate::Dense(game.predicate().to_vec()),
        })
    }

    /// Compact JSON of the canonical form of this file's game.
    pub fn canonical_json(&self) -> Result<String> {
        let canonical = GameFile::from_game(&self.to_game()?)?;
        serde_json::to_string(&canonical).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Hex SHA-256 of [`GameFile::canonical_json`].
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_json()?.as_bytes())))
    }
}

/// Digest of a game's canonical file.
pub fn game_digest(game: &Game) -> Result<String> {
    GameFile::from_game(game)?.digest()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{anticorrelation, chsh, BUILTIN_NAMES};

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("1/3").unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(parse_rational("2/6").unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("-.5").unwrap(), BigRational::new((-1).into(), 2.into()));
        assert_eq!(parse_rational(" 1 ").unwrap(), BigRational::from_integer(1.into()));
        for bad in ["", "1/0", "x", "0.", "1.2.3", "1/2/3"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
        assert_eq!(format_rational(&parse_rational("4/12").unwrap()), "1/3");
    }

    #[test]
    fn support_and_wins_form() {
        let text = r#"{
            "name": "anticorrelation",
            "m": 3,
            "query_alphabets": [2, 2, 2],
            "response_alphabets": [2, 2, 2],
            "query": {"kind": "support", "mass": [[[0,1,1], "1/3"], [[1,0,1], "1/3"], [[1,1,0], "1/3"]]},
            "predicate": {"wins": []}
        }"#;
        let f = GameFile::from_json(text).unwrap();
        let g = f.to_game().unwrap();
        assert_eq!(g.exact_query().unwrap().mass(), anticorrelation().exact_query().unwrap().mass());
        assert!(g.predicate().iter().all(|&w| w == 0));
    }

    #[test]
    fn builtins_round_trip() {
        for name in BUILTIN_NAMES {
            let g = crate::game::builtin(name).unwrap();
            let f = GameFile::from_game(&g).unwrap();
            let text = serde_json::to_string(&f).unwrap();
            let back = GameFile::from_json(&text).unwrap().to_game().unwrap();
            assert_eq!(back, g);
            assert_eq!(f.digest().unwrap(), GameFile::from_json(&text).unwrap().digest().unwrap());
        }
    }

    #[test]
    fn equivalent_files_share_a_digest() {
        let dense = GameFile::from_game(&chsh()).unwrap();
        let mut wins = Vec::new();
        for x in 0..4usize {
            for u in 0..4usize {
                if chsh().omega(x, u) == 1 {
                    wins.push((vec![x / 2, x % 2], vec![u / 2, u % 2]));
                }
            }
        }
        let sparse = GameFile {
            query: QueryMasses::Dense { mass: vec!["0.25".into(), "1/4".into(), "2/8".into(), "1/4".into()] },
            predicate: Predicate::Wins(wins),
            ..dense.clone()
        };
        assert_eq!(sparse.to_game().unwrap(), dense.to_game().unwrap());
        assert_eq!(sparse.digest().unwrap(), dense.digest().unwrap());
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        let base = GameFile::from_game(&chsh()).unwrap();
        let short = GameFile { query_alphabets: vec![2], ..base.clone() };
        assert!(matches!(short.to_game(), Err(Error::Parse(_))));
        let off = GameFile { query: QueryMasses::Support { mass: vec![(vec![2, 0], "1".into())] }, ..base.clone() };
        assert!(matches!(off.to_game(), Err(Error::Parse(_))));
        let unnormalized = GameFile { query: QueryMasses::Dense { mass: vec!["1/4".into(); 3].into_iter().chain(["1/5".to_string()]).collect() }, ..base.clone() };
        assert!(matches!(unnormalized.to_game(), Err(Error::InvalidGame(_))));
        assert!(matches!(GameFile::from_json("{\"m\": 2}"), Err(Error::Parse(_))));
        let nonbinary = GameFile { predicate: Predicate::Dense(vec![2; 16]), ..base };
        assert!(matches!(nonbinary.to_game(), Err(Error::InvalidGame(_))));
    }
}
