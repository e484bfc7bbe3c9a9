use num::BigRational;

use crate::program::{Comparator, ExactProgram, LinearProgram};
use crate::scalar::LpScalar;
use crate::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T = f64> {
    pub status: LpStatus,
    /// Objective value at `primal`; zero unless `status` is optimal.
    pub objective: T,
    /// Structural variable values; empty unless `status` is optimal.
    pub primal: Vec<T>,
    /// Largest row or bound violation of `primal`.
    pub max_residual: f64,
    pub iterations: usize,
}

impl<T: LpScalar> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Entering-column rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pricing {
    /// Largest reduced cost; Bland's rule after a degenerate streak.
    Dantzig,
    /// Largest reduced cost per unit edge length, with edge norms kept up
    /// to date in every pivot; a pseudo-random eligible column breaks
    /// degenerate streaks.
    SteepestEdge,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Consecutive degenerate pivots tolerated before an anti-cycling step.
    pub degenerate_switch: usize,
    pub pricing: Pricing,
    /// Largest residual accepted for a floating optimal solution.
    pub residual_limit: f64,
    /// Scale of the random right-hand-side shifts applied to floating
    /// programs against degeneracy; zero disables them. Ignored for exact
    /// scalars.
    pub perturbation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            degenerate_switch: 50,
            pricing: Pricing::SteepestEdge,
            residual_limit: 1e-8,
            perturbation: 1e-7,
        }
    }
}

/// Solves a floating-point program with default options.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions::default())
}

/// Solves a rational program exactly. All pivoting decisions use exact sign
/// tests, so the returned optimum is the true optimum of the rational data.
pub fn solve_exact(lp: &ExactProgram) -> Result<LpSolution<BigRational>, LpError> {
    solve_with(lp, &SolverOptions { pricing: Pricing::Dantzig, ..SolverOptions::default() })
}

pub fn solve_with<T: LpScalar>(
    lp: &LinearProgram<T>,
    opts: &SolverOptions,
) -> Result<LpSolution<T>, LpError> {
    lp.validate()?;
    let exact = T::pivot_tol().is_exact_zero();
    let mut tab = Tableau::build(lp, opts.pricing);
    // Homogeneous rows start with artificials at level zero; pivoting them
    // out first is free of any feasibility effect and keeps them from
    // blocking every ratio test in phase one.
    tab.drive_out_artificials(true);
    if !exact && opts.perturbation > 0.0 {
        tab.perturb(opts.perturbation);
    }
    if tab.has_artificials() {
        match tab.run(Phase::One, opts)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => unreachable!("phase one objective is bounded by zero"),
        }
        if !tab.phase_one_within(if exact { T::zero() } else { T::from_f64(1e-6).unwrap_or_else(T::zero) }) {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: T::zero(),
                primal: Vec::new(),
                max_residual: 0.0,
                iterations: tab.iterations,
            });
        }
        tab.drive_out_artificials(false);
    }
    let status = match tab.run(Phase::Two, opts)? {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            objective: T::zero(),
            primal: Vec::new(),
            max_residual: 0.0,
            iterations: tab.iterations,
        });
    }
    if !exact {
        tab.unperturb(lp, opts)?;
    }
    let primal = tab.primal(lp.num_vars());
    let objective = lp
        .objective()
        .iter()
        .zip(&primal)
        .fold(T::zero(), |acc, (c, x)| acc.add(&c.mul(x)));
    let max_residual = lp.max_residual(&primal);
    if max_residual > opts.residual_limit {
        return Err(LpError::Inaccurate { residual: max_residual });
    }
    Ok(LpSolution {
        status,
        objective,
        primal,
        max_residual,
        iterations: tab.iterations,
    })
}

/// xorshift64; deterministic for a given seed.
fn xorshift(state: &mut u64) -> u64 {
    let mut x = *state;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    *state = x;
    x
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum Outcome {
    Optimal,
    Unbounded,
}

enum Step {
    Flip,
    Pivot { row: usize, to_upper: bool },
}

/// Dense tableau `B^-1 A` over structural and logical columns. Artificial
/// variables are never stored as columns: once one leaves the basis it can
/// not re-enter, so only its basis slot is tracked (ids `>= ncols`).
struct Tableau<T> {
    m: usize,
    ncols: usize,
    cells: Vec<T>,
    beta: Vec<T>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    upper: Vec<Option<T>>,
    d_phase1: Vec<T>,
    d_phase2: Vec<T>,
    /// Squared edge norms `1 + sum_i a_ij^2`, steepest edge only.
    edge: Option<Vec<f64>>,
    rng: u64,
    /// Original constraint index of each tableau row.
    row_ids: Vec<usize>,
    /// Whether each original row was negated to make its rhs nonnegative.
    negated: Vec<bool>,
    /// Original row and coefficient of each logical column.
    logical: Vec<(usize, T)>,
    iterations: usize,
}

impl<T: LpScalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>, pricing: Pricing) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints().len();
        let rhs: Vec<T> = lp.constraints().iter().map(|row| row.rhs.clone()).collect();

        // Orient every row so that its rhs is nonnegative and, where
        // possible, a slack gives an initial feasible basic variable.
        let mut oriented = Vec::with_capacity(m);
        for (row, b) in lp.constraints().iter().zip(&rhs) {
            let neg = match row.cmp {
                Comparator::Le => *b < T::zero(),
                Comparator::Ge => *b <= T::zero(),
                Comparator::Eq => *b < T::zero(),
            };
            let cmp = match (row.cmp, neg) {
                (c, false) => c,
                (Comparator::Le, true) => Comparator::Ge,
                (Comparator::Ge, true) => Comparator::Le,
                (Comparator::Eq, true) => Comparator::Eq,
            };
            oriented.push((neg, cmp));
        }
        let num_logical = oriented
            .iter()
            .filter(|(_, c)| *c != Comparator::Eq)
            .count();
        let ncols = n + num_logical;

        let mut cells = vec![T::zero(); m * ncols];
        let mut beta = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut is_basic = vec![false; ncols];
        let mut next_logical = n;
        let mut logical = Vec::with_capacity(num_logical);
        for (i, (row, (neg, cmp))) in lp.constraints().iter().zip(&oriented).enumerate() {
            let base = i * ncols;
            for (var, coef) in &row.terms {
                let c = if *neg { coef.neg() } else { coef.clone() };
                cells[base + var] = cells[base + var].add(&c);
            }
            beta.push(if *neg { rhs[i].neg() } else { rhs[i].clone() });
            match cmp {
                Comparator::Le => {
                    cells[base + next_logical] = T::one();
                    logical.push((i, T::one()));
                    basis.push(next_logical);
                    is_basic[next_logical] = true;
                    next_logical += 1;
                }
                Comparator::Ge => {
                    cells[base + next_logical] = T::one().neg();
                    logical.push((i, T::one().neg()));
                    basis.push(ncols + i);
                    next_logical += 1;
                }
                Comparator::Eq => basis.push(ncols + i),
            }
        }

        let mut upper: Vec<Option<T>> = lp.upper_bounds().to_vec();
        upper.resize(ncols, None);

        let mut d_phase2 = lp.objective().to_vec();
        d_phase2.resize(ncols, T::zero());
        let mut d_phase1 = vec![T::zero(); ncols];
        for i in 0..m {
            if basis[i] >= ncols {
                let row = &cells[i * ncols..(i + 1) * ncols];
                for (d, a) in d_phase1.iter_mut().zip(row) {
                    if !a.is_exact_zero() {
                        *d = d.add(a);
                    }
                }
            }
        }

        let mut tab = Self {
            m,
            ncols,
            cells,
            beta,
            basis,
            is_basic,
            at_upper: vec![false; ncols],
            upper,
            d_phase1,
            d_phase2,
            edge: None,
            rng: 0x9e37_79b9_7f4a_7c15,
            row_ids: (0..m).collect(),
            negated: oriented.iter().map(|(neg, _)| *neg).collect(),
            logical,
            iterations: 0,
        };
        if pricing == Pricing::SteepestEdge {
            tab.refresh_edges();
        }
        tab
    }

    fn refresh_edges(&mut self) {
        let mut edge = vec![1.0; self.ncols];
        for row in self.cells.chunks(self.ncols) {
            for (e, a) in edge.iter_mut().zip(row) {
                if !a.is_exact_zero() {
                    let v = a.to_f64();
                    *e += v * v;
                }
            }
        }
        self.edge = Some(edge);
    }

    fn next_random(&mut self) -> u64 {
        xorshift(&mut self.rng)
    }

    fn has_artificials(&self) -> bool {
        self.basis.iter().any(|&b| b >= self.ncols)
    }

    fn phase_one_feasible(&self) -> bool {
        self.phase_one_within(T::feas_tol())
    }

    /// Harris steps leave basic values up to the feasibility tolerance out
    /// of bounds; dependent rows collect that slack in their artificials,
    /// so the final verdict uses a looser tolerance than the stopping test.
    fn phase_one_within(&self, tol: T) -> bool {
        self.basis
            .iter()
            .zip(&self.beta)
            .all(|(&b, v)| b < self.ncols || *v <= tol)
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> &T {
        &self.cells[i * self.ncols + j]
    }

    fn value_of_nonbasic(&self, j: usize) -> T {
        if self.at_upper[j] {
            self.upper[j].clone().unwrap_or_else(T::zero)
        } else {
            T::zero()
        }
    }

    fn run(&mut self, phase: Phase, opts: &SolverOptions) -> Result<Outcome, LpError> {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(LpError::Stalled {
                    iterations: self.iterations,
                });
            }
            if phase == Phase::One && self.phase_one_feasible() {
                return Ok(Outcome::Optimal);
            }
            if self.iterations % 256 == 0 && self.edge.is_some() {
                self.refresh_edges();
            }
            let Some(q) = self.select_entering(phase, bland) else {
                return Ok(Outcome::Optimal);
            };
            let Some((t, step)) = self.ratio_test(q, bland) else {
                return Ok(Outcome::Unbounded);
            };
            self.iterations += 1;
            if t <= T::feas_tol() {
                degenerate += 1;
                if degenerate > opts.degenerate_switch {
                    bland = true;
                }
                if self.edge.is_some() {
                    // Random steps break stalls; only every other
                    // degenerate step so pricing keeps its say.
                    bland = bland && degenerate % 2 == 0;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.apply(q, t, step);
        }
    }

    fn select_entering(&mut self, phase: Phase, bland: bool) -> Option<usize> {
        if bland && self.edge.is_some() {
            let eligible = self.eligible(phase);
            if eligible.is_empty() {
                return None;
            }
            let k = (self.next_random() % eligible.len() as u64) as usize;
            return Some(eligible[k]);
        }
        let d = match phase {
            Phase::One => &self.d_phase1,
            Phase::Two => &self.d_phase2,
        };
        let tol = T::opt_tol();
        let neg_tol = tol.neg();
        let mut best: Option<(usize, T)> = None;
        for j in 0..self.ncols {
            if self.is_basic[j] {
                continue;
            }
            if matches!(&self.upper[j], Some(u) if u.is_exact_zero()) {
                continue;
            }
            let dj = &d[j];
            let eligible = if self.at_upper[j] { *dj < neg_tol } else { *dj > tol };
            if !eligible {
                continue;
            }
            if bland {
                return Some(j);
            }
            let mag = match &self.edge {
                Some(edge) => {
                    let v = dj.to_f64();
                    T::from_f64(v * v / edge[j].max(1.0)).unwrap_or_else(T::zero)
                }
                None => dj.abs(),
            };
            if best.as_ref().is_none_or(|(_, b)| mag > *b) {
                best = Some((j, mag));
            }
        }
        best.map(|(j, _)| j)
    }

    fn eligible(&self, phase: Phase) -> Vec<usize> {
        let d = match phase {
            Phase::One => &self.d_phase1,
            Phase::Two => &self.d_phase2,
        };
        let tol = T::opt_tol();
        let neg_tol = tol.neg();
        (0..self.ncols)
            .filter(|&j| {
                !self.is_basic[j]
                    && !matches!(&self.upper[j], Some(u) if u.is_exact_zero())
                    && if self.at_upper[j] { d[j] < neg_tol } else { d[j] > tol }
            })
            .collect()
    }

    /// Harris two-pass ratio test: the first pass finds the longest step
    /// allowed with bounds relaxed by the feasibility tolerance, the second
    /// takes the largest pivot among rows blocking within that step.
    fn ratio_test(&self, q: usize, bland: bool) -> Option<(T, Step)> {
        let decreasing = self.at_upper[q];
        let piv = T::pivot_tol();
        let relax = T::feas_tol();
        // (row, a, exact limit, to_upper)
        let mut blocking: Vec<(usize, T, T, bool)> = Vec::new();
        let mut theta_max: Option<T> = None;
        for i in 0..self.m {
            let raw = self.cell(i, q);
            if raw.abs() <= piv {
                continue;
            }
            let a = if decreasing { raw.neg() } else { raw.clone() };
            let var = self.basis[i];
            let (room, to_upper, denom) = if a > T::zero() {
                (self.beta[i].clone(), false, a.clone())
            } else {
                let ub = if var < self.ncols { self.upper[var].as_ref() } else { None };
                let Some(ub) = ub else { continue };
                (ub.sub(&self.beta[i]), true, a.neg())
            };
            let room = if room < T::zero() { T::zero() } else { room };
            let relaxed = room.add(&relax).div(&denom);
            if theta_max.as_ref().is_none_or(|t| relaxed < *t) {
                theta_max = Some(relaxed);
            }
            blocking.push((i, a, room.div(&denom), to_upper));
        }
        let mut best: Option<(T, usize, bool, T)> = None; // (t, row, to_upper, |a|)
        if let Some(theta) = theta_max {
            for (i, a, limit, to_upper) in blocking {
                if limit > theta {
                    continue;
                }
                let mag = a.abs();
                let replace = match &best {
                    None => true,
                    Some((_, brow, _, bmag)) => {
                        if bland {
                            self.basis[i] < self.basis[*brow]
                        } else {
                            mag > *bmag
                        }
                    }
                };
                if replace {
                    best = Some((limit, i, to_upper, mag));
                }
            }
        }
        let own = self.upper[q].clone();
        match (best, own) {
            (None, None) => None,
            (None, Some(u)) => Some((u, Step::Flip)),
            (Some((t, row, to_upper, _)), own) => match own {
                Some(u) if u <= t => Some((u, Step::Flip)),
                _ => Some((t, Step::Pivot { row, to_upper })),
            },
        }
    }

    fn apply(&mut self, q: usize, t: T, step: Step) {
        let decreasing = self.at_upper[q];
        if !t.is_exact_zero() {
            let signed = if decreasing { t.neg() } else { t.clone() };
            for i in 0..self.m {
                let a = &self.cells[i * self.ncols + q];
                if !a.is_exact_zero() {
                    let a = a.clone();
                    self.beta[i].sub_mul_assign(&signed, &a);
                }
            }
        }
        match step {
            Step::Flip => {
                self.at_upper[q] = !decreasing;
            }
            Step::Pivot { row, to_upper } => {
                let leaving = self.basis[row];
                if leaving < self.ncols {
                    self.is_basic[leaving] = false;
                    self.at_upper[leaving] = to_upper;
                }
                let entering_value = if decreasing {
                    self.upper[q].clone().unwrap_or_else(T::zero).sub(&t)
                } else {
                    t
                };
                self.beta[row] = entering_value;
                self.basis[row] = q;
                self.is_basic[q] = true;
                self.at_upper[q] = false;
                self.pivot(row, q);
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncols = self.ncols;
        let p = self.cells[r * ncols + q].clone();
        let mut prow: Vec<(usize, T)> = Vec::new();
        let mut edge = self.edge.take();
        for j in 0..ncols {
            let v = &mut self.cells[r * ncols + j];
            if v.is_exact_zero() {
                continue;
            }
            let old = v.to_f64();
            *v = if j == q { T::one() } else { v.div(&p) };
            if let Some(e) = edge.as_mut() {
                let new = v.to_f64();
                e[j] += new * new - old * old;
            }
            prow.push((j, v.clone()));
        }
        let drop = T::drop_tol();
        for (i, row) in self.cells.chunks_exact_mut(ncols).enumerate() {
            if i == r || row[q].is_exact_zero() {
                continue;
            }
            let f = row[q].clone();
            match edge.as_mut() {
                Some(e) => {
                    for (j, v) in &prow {
                        let cell = &mut row[*j];
                        let old = cell.to_f64();
                        cell.sub_mul_assign(&f, v);
                        if cell.abs() < drop {
                            *cell = T::zero();
                        }
                        let new = cell.to_f64();
                        e[*j] += new * new - old * old;
                    }
                    let old = f.to_f64();
                    e[q] -= old * old;
                }
                None => {
                    for (j, v) in &prow {
                        let cell = &mut row[*j];
                        cell.sub_mul_assign(&f, v);
                        if cell.abs() < drop {
                            *cell = T::zero();
                        }
                    }
                }
            }
            row[q] = T::zero();
        }
        self.edge = edge;
        for d in [&mut self.d_phase1, &mut self.d_phase2] {
            let f = d[q].clone();
            if f.is_exact_zero() {
                continue;
            }
            for (j, v) in &prow {
                d[*j].sub_mul_assign(&f, v);
                if d[*j].abs() < drop {
                    d[*j] = T::zero();
                }
            }
            d[q] = T::zero();
        }
    }

    /// Pivots zero-level artificials out of the basis; rows where that is
    /// impossible are linearly dependent on the others and are dropped.
    fn drive_out_artificials(&mut self, zero_level_only: bool) {
        let tol = if T::pivot_tol().is_exact_zero() {
            T::zero()
        } else {
            T::from_f64(1e-7).unwrap_or_else(T::zero)
        };
        let mut redundant = Vec::new();
        for r in 0..self.m {
            if self.basis[r] < self.ncols || (zero_level_only && !self.beta[r].is_exact_zero()) {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.ncols {
                if self.is_basic[j] {
                    continue;
                }
                let mag = self.cell(r, j).abs();
                if mag > tol && best.as_ref().is_none_or(|(_, b)| mag > *b) {
                    best = Some((j, mag));
                }
            }
            match best {
                Some((q, _)) => {
                    let value = self.value_of_nonbasic(q);
                    self.beta[r] = value;
                    self.basis[r] = q;
                    self.is_basic[q] = true;
                    self.at_upper[q] = false;
                    self.pivot(r, q);
                }
                None => redundant.push(r),
            }
        }
        if redundant.is_empty() {
            return;
        }
        let ncols = self.ncols;
        let keep: Vec<usize> = (0..self.m).filter(|r| !redundant.contains(r)).collect();
        let mut cells = Vec::with_capacity(keep.len() * ncols);
        for &r in &keep {
            cells.extend_from_slice(&self.cells[r * ncols..(r + 1) * ncols]);
        }
        self.cells = cells;
        self.beta = keep.iter().map(|&r| self.beta[r].clone()).collect();
        self.basis = keep.iter().map(|&r| self.basis[r]).collect();
        self.row_ids = keep.iter().map(|&r| self.row_ids[r]).collect();
        self.m = keep.len();
    }

    /// Recomputes the basic values from the original rows, discarding the
    /// drift accumulated in `beta` over many pivots. Skipped when the basis
    /// matrix is numerically singular.
    fn refine(&mut self, lp: &LinearProgram<T>) {
        let m = self.m;
        let n = lp.num_vars();
        let mut pos = vec![usize::MAX; self.ncols];
        for (k, &b) in self.basis.iter().enumerate() {
            if b >= self.ncols {
                return;
            }
            pos[b] = k;
        }
        let mut row_of = vec![usize::MAX; lp.constraints().len()];
        for (i, &r) in self.row_ids.iter().enumerate() {
            row_of[r] = i;
        }
        let mut mat = vec![T::zero(); m * m];
        let mut rhs = vec![T::zero(); m];
        for (i, &r) in self.row_ids.iter().enumerate() {
            let row = &lp.constraints()[r];
            let sign = |v: &T| if self.negated[r] { v.neg() } else { v.clone() };
            rhs[i] = sign(&row.rhs);
            for (var, coef) in &row.terms {
                let c = sign(coef);
                if self.is_basic[*var] {
                    let cell = &mut mat[i * m + pos[*var]];
                    *cell = cell.add(&c);
                } else if self.at_upper[*var] {
                    let u = self.upper[*var].clone().unwrap_or_else(T::zero);
                    rhs[i] = rhs[i].sub(&c.mul(&u));
                }
            }
        }
        for (l, (r, coef)) in self.logical.iter().enumerate() {
            let j = n + l;
            let i = row_of[*r];
            if i != usize::MAX && self.is_basic[j] {
                mat[i * m + pos[j]] = coef.clone();
            }
        }
        // Gaussian elimination with partial pivoting.
        let mut perm: Vec<usize> = (0..m).collect();
        for col in 0..m {
            let (best, mag) = (col..m)
                .map(|i| (i, mat[perm[i] * m + col].abs()))
                .fold((col, T::zero()), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            if mag.to_f64() < 1e-12 {
                return;
            }
            perm.swap(col, best);
            let prow = perm[col];
            let p = mat[prow * m + col].clone();
            for &other in &perm[col + 1..] {
                let f = mat[other * m + col].div(&p);
                if f.is_exact_zero() {
                    continue;
                }
                for c in col..m {
                    let v = mat[prow * m + c].clone();
                    mat[other * m + c].sub_mul_assign(&f, &v);
                }
                let v = rhs[prow].clone();
                rhs[other].sub_mul_assign(&f, &v);
            }
        }
        let mut x = vec![T::zero(); m];
        for col in (0..m).rev() {
            let prow = perm[col];
            let mut acc = rhs[prow].clone();
            for c in col + 1..m {
                acc.sub_mul_assign(&mat[prow * m + c], &x[c]);
            }
            x[col] = acc.div(&mat[prow * m + col]);
        }
        self.beta = x;
    }

    /// Moves every basic value into the interior by a random amount in
    /// `[scale, 2 scale]`: the same as solving with right-hand side
    /// `b + B eps` for the current basis `B`, so no basic variable sits
    /// at a bound.
    fn perturb(&mut self, scale: f64) {
        let mut rng = 0x2545_f491_4f6c_dd1d_u64;
        for i in 0..self.m {
            let eps = scale * (1.0 + (xorshift(&mut rng) >> 11) as f64 / (1u64 << 53) as f64);
            let Some(eps) = T::from_f64(eps) else { continue };
            let b = self.basis[i];
            let room = if b < self.ncols { self.upper[b].as_ref().map(|u| u.sub(&self.beta[i])) } else { None };
            match room {
                Some(room) if room < eps.add(&eps) => {
                    if self.beta[i] >= eps.add(&eps) {
                        self.beta[i] = self.beta[i].sub(&eps);
                    }
                }
                _ => self.beta[i] = self.beta[i].add(&eps),
            }
        }
    }

    /// Returns to the true right-hand side: basic values are recomputed
    /// from the original rows and any small infeasibility left by the shift
    /// is removed with dual simplex pivots, which keep the basis optimal.
    fn unperturb(&mut self, lp: &LinearProgram<T>, opts: &SolverOptions) -> Result<(), LpError> {
        self.refine(lp);
        let tol = T::feas_tol();
        let mut pivots = 0usize;
        loop {
            // Most violated basic variable.
            let mut worst: Option<(usize, T, bool)> = None;
            for (i, &b) in self.basis.iter().enumerate() {
                if b >= self.ncols {
                    continue;
                }
                let (gap, above) = match &self.upper[b] {
                    Some(u) if self.beta[i] > *u => (self.beta[i].sub(u), true),
                    _ => (self.beta[i].neg(), false),
                };
                if gap > tol && worst.as_ref().is_none_or(|(_, g, _)| gap > *g) {
                    worst = Some((i, gap, above));
                }
            }
            let Some((r, _, above)) = worst else {
                return Ok(());
            };
            if self.iterations >= opts.max_iterations {
                return Err(LpError::Stalled { iterations: self.iterations });
            }
            // The leaving variable moves up to zero (or down to its upper
            // bound); the entering column keeps every reduced cost signed.
            let piv = T::pivot_tol();
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.ncols {
                if self.is_basic[j] || matches!(&self.upper[j], Some(u) if u.is_exact_zero()) {
                    continue;
                }
                let a = self.cell(r, j);
                let a = if above { a.neg() } else { a.clone() };
                let usable = if self.at_upper[j] { a > piv } else { a < piv.neg() };
                if !usable {
                    continue;
                }
                let ratio = self.d_phase2[j].abs().div(&a.abs());
                if best.as_ref().is_none_or(|(_, b)| ratio < *b) {
                    best = Some((j, ratio));
                }
            }
            let Some((q, _)) = best else {
                return Ok(());
            };
            let target = if above { self.upper[self.basis[r]].clone().unwrap_or_else(T::zero) } else { T::zero() };
            let delta = self.beta[r].sub(&target).div(self.cell(r, q));
            let (t, to_upper) = if self.at_upper[q] { (delta.neg(), above) } else { (delta, above) };
            let t = if t < T::zero() { T::zero() } else { t };
            self.iterations += 1;
            self.apply(q, t, Step::Pivot { row: r, to_upper });
            pivots += 1;
            if pivots % 64 == 0 {
                self.refine(lp);
            }
        }
    }

    fn primal(&self, n: usize) -> Vec<T> {
        let mut x: Vec<T> = (0..n).map(|j| self.value_of_nonbasic(j)).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.beta[i].clone();
            }
        }
        for (j, v) in x.iter_mut().enumerate() {
            if *v < T::zero() {
                *v = T::zero();
            }
            if let Some(u) = &self.upper[j] {
                if *v > *u {
                    *v = u.clone();
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn box_bounded_sum() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.set_upper(0, 1.0);
        lp.set_upper(1, 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, 2.0);
        assert_eq!(sol.primal, vec![1.0, 1.0]);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, 1.0);
        lp.add_constraint(vec![(0, 1.0)], Comparator::Le, -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Comparator::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        // x + y = 1 stated three times, plus 2x + 2y = 2.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 3.0);
        lp.set_objective(1, 1.0);
        for _ in 0..3 {
            lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Comparator::Eq, 1.0);
        }
        lp.add_constraint(vec![(0, 2.0), (1, 2.0)], Comparator::Eq, 2.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ge_rows_and_bound_flips() {
        // max -x - y  s.t.  x + y >= 1.5, x <= 1, y <= 1  ->  -1.5
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, -1.0);
        lp.set_objective(1, -1.0);
        lp.set_upper(0, 1.0);
        lp.set_upper(1, 1.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Comparator::Ge, 1.5);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 1.5).abs() < 1e-12);
        assert!(sol.max_residual <= 1e-12);
    }

    /// Nonsignalling boxes for CHSH: every marginal row is homogeneous, so
    /// the unperturbed start is fully degenerate.
    fn chsh_boxes() -> LinearProgram {
        let var = |x: usize, y: usize, a: usize, b: usize| ((x * 2 + y) * 2 + a) * 2 + b;
        let mut lp = LinearProgram::new(16);
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        if (a ^ b) == (x & y) {
                            lp.set_objective(var(x, y, a, b), 0.25);
                        }
                    }
                }
                let all = (0..4).map(|k| (var(x, y, k / 2, k % 2), 1.0)).collect();
                lp.add_constraint(all, Comparator::Eq, 1.0);
            }
        }
        for x in 0..2 {
            for a in 0..2 {
                let mut terms: Vec<(usize, f64)> = (0..2).map(|b| (var(x, 0, a, b), 1.0)).collect();
                terms.extend((0..2).map(|b| (var(x, 1, a, b), -1.0)));
                lp.add_constraint(terms, Comparator::Eq, 0.0);
            }
        }
        for y in 0..2 {
            for b in 0..2 {
                let mut terms: Vec<(usize, f64)> = (0..2).map(|a| (var(0, y, a, b), 1.0)).collect();
                terms.extend((0..2).map(|a| (var(1, y, a, b), -1.0)));
                lp.add_constraint(terms, Comparator::Eq, 0.0);
            }
        }
        for j in 0..16 {
            lp.set_upper(j, 0.75);
        }
        lp
    }

    #[test]
    fn perturbed_solve_matches_plain_and_exact() {
        let lp = chsh_boxes();
        let shifted = solve(&lp).unwrap();
        let plain = solve_with(&lp, &SolverOptions { perturbation: 0.0, ..SolverOptions::default() }).unwrap();
        let exact = solve_exact(&lp.to_exact().unwrap()).unwrap();
        assert_eq!(exact.objective, rat(1, 1));
        assert!((shifted.objective - 1.0).abs() < 1e-12);
        assert!((plain.objective - 1.0).abs() < 1e-12);
        assert!(shifted.max_residual <= 1e-12);
        assert!(shifted.primal.iter().all(|&v| (0.0..=0.75).contains(&v)));
    }

    #[test]
    fn exact_thirds() {
        // max x + y + z  s.t.  x + y <= 2/3, y + z <= 2/3, x + z <= 2/3  ->  1
        let mut lp = ExactProgram::new(3);
        for j in 0..3 {
            lp.set_objective(j, rat(1, 1));
        }
        let two_thirds = rat(2, 3);
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            lp.add_constraint(
                vec![(a, rat(1, 1)), (b, rat(1, 1))],
                Comparator::Le,
                two_thirds.clone(),
            );
        }
        let sol = solve_exact(&lp).unwrap();
        assert_eq!(sol.objective, rat(1, 1));
        assert_eq!(sol.max_residual, 0.0);
    }

    #[test]
    fn iteration_cap_reports_stall() {
        let mut lp = LinearProgram::new(3);
        for j in 0..3 {
            lp.set_objective(j, 1.0);
            lp.set_upper(j, 1.0);
            lp.add_constraint(vec![(j, 1.0)], Comparator::Eq, 0.5);
        }
        let opts = SolverOptions {
            max_iterations: 1,
            ..SolverOptions::default()
        };
        assert!(matches!(solve_with(&lp, &opts), Err(LpError::Stalled { .. })));
    }

    #[test]
    fn malformed_index_rejected() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(3, 1.0)], Comparator::Le, 1.0);
        assert!(matches!(solve(&lp), Err(LpError::Malformed(_))));
    }

    #[test]
    fn dump_is_stable() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_upper(1, 2.0);
        lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Comparator::Le, 3.0);
        let text = lp.to_lp_string();
        assert_eq!(text, lp.clone().to_lp_string());
        assert!(text.contains("r0: + 1 x0 - 1 x1 <= 3"));
        assert!(text.contains("0 <= x1 <= 2"));
    }
}
