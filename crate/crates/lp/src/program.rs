use std::fmt::{self, Write as _};

use num::BigRational;

use crate::scalar::LpScalar;
use crate::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparator {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
        })
    }
}

/// One linear constraint `sum(coef * x[var]) cmp rhs`.
///
/// Terms are stored sparsely; a variable may appear at most once.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T = f64> {
    pub terms: Vec<(usize, T)>,
    pub cmp: Comparator,
    pub rhs: T,
}

/// A maximization problem over nonnegative variables with optional upper bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T = f64> {
    num_vars: usize,
    objective: Vec<T>,
    upper: Vec<Option<T>>,
    constraints: Vec<Constraint<T>>,
}

/// Exact-rational program, solved by [`crate::solve_exact`].
pub type ExactProgram = LinearProgram<BigRational>;

impl<T: LpScalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![T::zero(); num_vars],
            upper: vec![None; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn upper_bounds(&self) -> &[Option<T>] {
        &self.upper
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn set_objective(&mut self, var: usize, coef: T) {
        self.objective[var] = coef;
    }

    pub fn set_upper(&mut self, var: usize, bound: T) {
        self.upper[var] = Some(bound);
    }

    /// Appends a constraint and returns its row index.
    pub fn add_constraint(&mut self, terms: Vec<(usize, T)>, cmp: Comparator, rhs: T) -> usize {
        self.constraints.push(Constraint { terms, cmp, rhs });
        self.constraints.len() - 1
    }

    /// Dense coefficient row, `num_vars` long.
    pub fn dense_row(&self, row: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_vars];
        for (var, coef) in &self.constraints[row].terms {
            out[*var] = out[*var].add(coef);
        }
        out
    }

    /// Checks index ranges, duplicate terms, bound signs and finiteness.
    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars || self.upper.len() != self.num_vars {
            return Err(LpError::Malformed("objective/bounds length mismatch".into()));
        }
        let finite = |v: &T| v.to_f64().is_finite();
        if let Some(j) = self.objective.iter().position(|c| !finite(c)) {
            return Err(LpError::Malformed(format!("non-finite objective coefficient at x{j}")));
        }
        for (j, ub) in self.upper.iter().enumerate() {
            if let Some(ub) = ub {
                if !finite(ub) || *ub < T::zero() {
                    return Err(LpError::Malformed(format!("invalid upper bound on x{j}")));
                }
            }
        }
        let mut seen = vec![usize::MAX; self.num_vars];
        for (i, row) in self.constraints.iter().enumerate() {
            if !finite(&row.rhs) {
                return Err(LpError::Malformed(format!("non-finite rhs in row {i}")));
            }
            for (var, coef) in &row.terms {
                if *var >= self.num_vars {
                    return Err(LpError::Malformed(format!(
                        "row {i} references x{var} but only {} variables exist",
                        self.num_vars
                    )));
                }
                if seen[*var] == i {
                    return Err(LpError::Malformed(format!("row {i} repeats x{var}")));
                }
                seen[*var] = i;
                if !finite(coef) {
                    return Err(LpError::Malformed(format!("non-finite coefficient in row {i}")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound by `x`, evaluated in `T`.
    pub fn max_residual(&self, x: &[T]) -> f64 {
        let mut worst = T::zero();
        for row in &self.constraints {
            let lhs = row
                .terms
                .iter()
                .fold(T::zero(), |acc, (v, c)| acc.add(&c.mul(&x[*v])));
            let viol = match row.cmp {
                Comparator::Le => lhs.sub(&row.rhs),
                Comparator::Ge => row.rhs.sub(&lhs),
                Comparator::Eq => lhs.sub(&row.rhs).abs(),
            };
            if viol > worst {
                worst = viol;
            }
        }
        for (j, v) in x.iter().enumerate() {
            if v.neg() > worst {
                worst = v.neg();
            }
            if let Some(ub) = &self.upper[j] {
                let over = v.sub(ub);
                if over > worst {
                    worst = over;
                }
            }
        }
        worst.to_f64()
    }

    /// Plain-text dump: objective, rows, bounds. Stable for identical input.
    pub fn to_lp_string(&self) -> String {
        let mut out = String::new();
        let fmt_terms = |out: &mut String, terms: &mut dyn Iterator<Item = (usize, &T)>| {
            let mut empty = true;
            for (v, c) in terms {
                if c.is_exact_zero() {
                    continue;
                }
                if *c < T::zero() {
                    let _ = write!(out, " - {} x{v}", c.abs());
                } else {
                    let _ = write!(out, " + {c} x{v}");
                }
                empty = false;
            }
            if empty {
                out.push_str(" 0");
            }
        };
        out.push_str("maximize\n obj:");
        fmt_terms(&mut out, &mut self.objective.iter().enumerate());
        out.push_str("\nsubject to\n");
        for (i, row) in self.constraints.iter().enumerate() {
            let _ = write!(out, " r{i}:");
            fmt_terms(&mut out, &mut row.terms.iter().map(|(v, c)| (*v, c)));
            let _ = writeln!(out, " {} {}", row.cmp, row.rhs);
        }
        out.push_str("bounds\n");
        for (j, ub) in self.upper.iter().enumerate() {
            match ub {
                Some(ub) => {
                    let _ = writeln!(out, " 0 <= x{j} <= {ub}");
                }
                None => {
                    let _ = writeln!(out, " x{j} >= 0");
                }
            }
        }
        out.push_str("end\n");
        out
    }
}

impl LinearProgram<f64> {
    /// Exact mirror of a floating program. Every binary64 value is a dyadic
    /// rational, so the conversion itself is lossless.
    pub fn to_exact(&self) -> Result<ExactProgram, LpError> {
        let conv = |v: f64| {
            <BigRational as LpScalar>::from_f64(v)
                .ok_or_else(|| LpError::Malformed(format!("cannot convert {v} to a rational")))
        };
        let mut exact = ExactProgram::new(self.num_vars);
        for (j, c) in self.objective.iter().enumerate() {
            exact.objective[j] = conv(*c)?;
        }
        for (j, ub) in self.upper.iter().enumerate() {
            if let Some(ub) = ub {
                exact.upper[j] = Some(conv(*ub)?);
            }
        }
        for row in &self.constraints {
            let terms = row
                .terms
                .iter()
                .map(|(v, c)| conv(*c).map(|c| (*v, c)))
                .collect::<Result<Vec<_>, _>>()?;
            exact.add_constraint(terms, row.cmp, conv(row.rhs)?);
        }
        Ok(exact)
    }
}
