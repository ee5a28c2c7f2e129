//! Dense two-phase tableau simplex for the small linear programs of the
//! least-core computations.
//!
//! Pricing is Dantzig's most-negative reduced cost; after a run of
//! degenerate pivots the solver switches to Bland's rule for the rest of the
//! phase, which guarantees termination. Results are checked against the
//! original constraints before they are returned.

use thiserror::Error;

/// Pivot element and reduced-cost threshold.
const PIVOT_EPS: f64 = 1e-11;
/// Residual of phase 1 above which the problem is declared infeasible.
const FEASIBILITY_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `optimize c.x  s.t.  rows,  lower <= x <= upper`. Bounds may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub direction: Direction,
    pub costs: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New program with all variables in `[0, inf)`.
    pub fn new(direction: Direction, costs: Vec<f64>) -> Self {
        let n = costs.len();
        Self {
            direction,
            costs,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn var_count(&self) -> usize {
        self.costs.len()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn free(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.costs.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension("bounds length differs from cost length".into()));
        }
        if let Some(i) = self.constraints.iter().position(|c| c.coeffs.len() != n) {
            return Err(LpError::Dimension(format!(
                "row {i} has {} coefficients, expected {n}",
                self.constraints[i].coeffs.len()
            )));
        }
        let finite = self.costs.iter().all(|v| v.is_finite())
            && self
                .constraints
                .iter()
                .all(|c| c.rhs.is_finite() && c.coeffs.iter().all(|v| v.is_finite()));
        let bounds_ok = self
            .lower
            .iter()
            .zip(&self.upper)
            .all(|(l, u)| !l.is_nan() && !u.is_nan() && *l != f64::INFINITY && *u != f64::NEG_INFINITY);
        if !finite || !bounds_ok {
            return Err(LpError::NonFinite);
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for ((v, l), u) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite data")]
    NonFinite,
    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
    /// Largest row or bound violation of `x` on the original program.
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = lo + y`
    Shift { col: usize, lo: f64 },
    /// `x = hi - y`
    Mirror { col: usize, hi: f64 },
    /// `x = y+ - y-`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs; last entry is minus the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// Columns that may enter the basis.
    allowed: Vec<bool>,
    pivots: usize,
    limit: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn width(&self) -> usize {
        self.obj.len() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(&pivot_row[..=w]) {
                    *x -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (x, p) in self.obj.iter_mut().zip(&pivot_row[..=w]) {
                *x -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn run(&mut self) -> Result<Step, LpError> {
        let w = self.width();
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.pivots >= self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            let entering = if bland {
                (0..w).find(|&j| self.allowed[j] && self.obj[j] < -PIVOT_EPS)
            } else {
                (0..w)
                    .filter(|&j| self.allowed[j] && self.obj[j] < -PIVOT_EPS)
                    .min_by(|&a, &b| self.obj[a].total_cmp(&self.obj[b]).then(a.cmp(&b)))
            };
            let Some(c) = entering else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > PIVOT_EPS {
                    let ratio = row[w].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - 1e-13
                                || (ratio <= best + 1e-13 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(Step::Unbounded);
            };
            if ratio <= 1e-13 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }
}

/// Solves `lp`. Infeasible and unbounded programs are outcomes, not errors.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.check()?;
    let n = lp.var_count();
    let sign = match lp.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };

    // Variable substitution.
    let mut maps = Vec::with_capacity(n);
    let mut cols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let m = if lo.is_finite() {
            if hi.is_finite() {
                if hi < lo {
                    return Ok(LpOutcome::Infeasible);
                }
                bound_rows.push((cols, hi - lo));
            }
            VarMap::Shift { col: cols, lo }
        } else if hi.is_finite() {
            VarMap::Mirror { col: cols, hi }
        } else {
            cols += 1;
            VarMap::Split {
                pos: cols - 1,
                neg: cols,
            }
        };
        cols += 1;
        maps.push(m);
    }
    let structural = cols;

    // Rows over structural columns.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; structural];
        let mut rhs = c.rhs;
        for (j, &coef) in c.coeffs.iter().enumerate() {
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    a[col] += coef;
                    rhs -= coef * lo;
                }
                VarMap::Mirror { col, hi } => {
                    a[col] -= coef;
                    rhs -= coef * hi;
                }
                VarMap::Split { pos, neg } => {
                    a[pos] += coef;
                    a[neg] -= coef;
                }
            }
        }
        rows.push((a, c.sense, rhs));
    }
    for &(col, cap) in &bound_rows {
        let mut a = vec![0.0; structural];
        a[col] = 1.0;
        rows.push((a, Sense::Le, cap));
    }
    let mut cost = vec![0.0; structural];
    let mut offset = 0.0;
    for (j, &c) in lp.costs.iter().enumerate() {
        let c = sign * c;
        match maps[j] {
            VarMap::Shift { col, lo } => {
                cost[col] += c;
                offset += c * lo;
            }
            VarMap::Mirror { col, hi } => {
                cost[col] -= c;
                offset += c * hi;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    // Nonnegative right-hand sides, then slack/surplus/artificial columns.
    for (a, sense, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = rows.len();
    let slacks = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let width = structural + slacks + artificials;
    let mut tableau = Tableau {
        rows: Vec::with_capacity(m),
        obj: vec![0.0; width + 1],
        basis: Vec::with_capacity(m),
        allowed: vec![true; width],
        pivots: 0,
        limit: 50_000 + 20 * (m + width),
    };
    let (mut s, mut art) = (structural, structural + slacks);
    let first_artificial = art;
    for (a, sense, rhs) in rows {
        let mut row = vec![0.0; width + 1];
        row[..structural].copy_from_slice(&a);
        row[width] = rhs;
        match sense {
            Sense::Le => {
                row[s] = 1.0;
                tableau.basis.push(s);
                s += 1;
            }
            Sense::Ge => {
                row[s] = -1.0;
                s += 1;
                row[art] = 1.0;
                tableau.basis.push(art);
                art += 1;
            }
            Sense::Eq => {
                row[art] = 1.0;
                tableau.basis.push(art);
                art += 1;
            }
        }
        tableau.rows.push(row);
    }

    // Phase 1: minimize the sum of artificials.
    if artificials > 0 {
        for j in first_artificial..width {
            tableau.obj[j] = 1.0;
        }
        for i in 0..m {
            if tableau.basis[i] >= first_artificial {
                for j in 0..=width {
                    tableau.obj[j] -= tableau.rows[i][j];
                }
            }
        }
        tableau.run()?;
        let residual = -tableau.obj[width];
        let scale = 1.0
            + tableau
                .rows
                .iter()
                .map(|r| r[width].abs())
                .fold(0.0, f64::max);
        if residual > FEASIBILITY_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tableau.rows.len() {
            if tableau.basis[i] >= first_artificial {
                let col = (0..first_artificial)
                    .filter(|&j| tableau.rows[i][j].abs() > 1e-9)
                    .max_by(|&a, &b| {
                        tableau.rows[i][a]
                            .abs()
                            .total_cmp(&tableau.rows[i][b].abs())
                    });
                match col {
                    Some(c) => tableau.pivot(i, c),
                    None => {
                        tableau.rows.remove(i);
                        tableau.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for j in first_artificial..width {
            tableau.allowed[j] = false;
        }
    }

    // Phase 2.
    tableau.obj = vec![0.0; width + 1];
    tableau.obj[..structural].copy_from_slice(&cost);
    for i in 0..tableau.rows.len() {
        let cb = if tableau.basis[i] < structural {
            cost[tableau.basis[i]]
        } else {
            0.0
        };
        if cb != 0.0 {
            for j in 0..=width {
                tableau.obj[j] -= cb * tableau.rows[i][j];
            }
        }
    }
    for j in 0..width {
        if !tableau.allowed[j] {
            tableau.obj[j] = 0.0;
        }
    }
    if let Step::Unbounded = tableau.run()? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut y = vec![0.0; width];
    for (i, &b) in tableau.basis.iter().enumerate() {
        y[b] = tableau.rows[i][width];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lo } => lo + y[col],
            VarMap::Mirror { col, hi } => hi - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective: f64 = lp.costs.iter().zip(&x).map(|(c, v)| c * v).sum();
    let max_violation = lp.max_violation(&x);
    let scale = 1.0
        + lp
            .constraints
            .iter()
            .map(|c| c.rhs.abs())
            .fold(0.0, f64::max);
    if max_violation > 1e-7 * scale {
        return Err(LpError::Numerical(format!(
            "solution violates the program by {max_violation:.3e}"
        )));
    }
    let _ = offset;
    Ok(LpOutcome::Optimal(LpSolution {
        x,
        objective,
        pivots: tableau.pivots,
        max_violation,
    }))
}
