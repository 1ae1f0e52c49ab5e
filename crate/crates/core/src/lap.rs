//! Linear assignment: square and rectangular Jonker-Volgenant solvers and an
//! exhaustive oracle.
//!
//! Rows are the objects that must all be assigned (example streamlines),
//! columns the candidates; a rectangular problem has at least as many columns
//! as rows and every row receives a distinct column.
//!
//! The square solver runs the three classic phases: column reduction with
//! reduction transfer, two rounds of augmenting row reduction, then shortest
//! augmenting paths for whatever rows are still free. The rectangular solver
//! starts from zero column prices instead of a column reduction (a positive
//! price on a column that ends up unassigned would break optimality) and
//! shares the other two phases.

use crate::error::{Error, Result};
use crate::real::Real;

const NONE: usize = usize::MAX;

/// Dense row-major cost matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T = f64> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Real> CostMatrix<T> {
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCost {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(CostMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|row| row.len() != c) {
            return Err(Error::Shape(format!(
                "row {bad} has {} entries, expected {c}",
                rows[bad].len()
            )));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Elementwise map; the result is re-validated.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.rows, self.cols, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Injective row-to-column map with its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T = f64> {
    pub row_to_col: Vec<usize>,
    pub total_cost: T,
}

impl<T: Real> Assignment<T> {
    fn from_cols(c: &CostMatrix<T>, row_to_col: Vec<usize>) -> Self {
        let total_cost = row_to_col
            .iter()
            .enumerate()
            .map(|(i, &j)| c.get(i, j))
            .sum();
        Assignment {
            row_to_col,
            total_cost,
        }
    }

    /// True when no column is used twice.
    pub fn is_injective(&self) -> bool {
        let mut seen = self.row_to_col.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

/// Recomputes the cost of `a` on `c`.
pub fn assignment_cost<T: Real>(c: &CostMatrix<T>, a: &Assignment<T>) -> Result<T> {
    if a.row_to_col.len() != c.rows() {
        return Err(Error::Shape(format!(
            "assignment covers {} rows, matrix has {}",
            a.row_to_col.len(),
            c.rows()
        )));
    }
    if let Some(&j) = a.row_to_col.iter().find(|&&j| j >= c.cols()) {
        return Err(Error::Shape(format!(
            "column {j} out of range for {} columns",
            c.cols()
        )));
    }
    Ok(a.row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| c.get(i, j))
        .sum())
}

/// Square LAP.
pub fn solve_lap<T: Real>(c: &CostMatrix<T>) -> Result<Assignment<T>> {
    if !c.is_square() {
        return Err(Error::Shape(format!(
            "square solver given a {}x{} matrix",
            c.rows(),
            c.cols()
        )));
    }
    Ok(Assignment::from_cols(c, Jv::new(c).solve(true)))
}

/// Rectangular LAP: every row gets a distinct column, `rows <= cols`.
/// A square input is handed to [`solve_lap`].
pub fn solve_rlap<T: Real>(c: &CostMatrix<T>) -> Result<Assignment<T>> {
    if c.rows() > c.cols() {
        return Err(Error::Shape(format!(
            "{} rows cannot be assigned to {} columns",
            c.rows(),
            c.cols()
        )));
    }
    if c.is_square() {
        return solve_lap(c);
    }
    Ok(Assignment::from_cols(c, Jv::new(c).solve(false)))
}

/// Rectangular LAP solved by padding to square with zero-cost dummy rows.
/// Dummy rows add a constant to every completion, so the real rows keep
/// their optimum. Independent second route used as an oracle in tests.
pub fn solve_rlap_padded<T: Real>(c: &CostMatrix<T>) -> Result<Assignment<T>> {
    if c.rows() > c.cols() {
        return Err(Error::Shape(format!(
            "{} rows cannot be assigned to {} columns",
            c.rows(),
            c.cols()
        )));
    }
    let n = c.cols();
    let mut values = c.values().to_vec();
    values.resize(n * n, T::zero());
    let square = CostMatrix::new(n, n, values)?;
    let mut cols = solve_lap(&square)?.row_to_col;
    cols.truncate(c.rows());
    Ok(Assignment::from_cols(c, cols))
}

/// Exhaustive minimum over all injections. Limited to 9 columns.
pub fn brute_force_lap<T: Real>(c: &CostMatrix<T>) -> Result<Assignment<T>> {
    if c.cols() > 9 {
        return Err(Error::TooLargeForOracle {
            rows: c.rows(),
            cols: c.cols(),
        });
    }
    if c.rows() > c.cols() {
        return Err(Error::Shape(format!(
            "{} rows cannot be assigned to {} columns",
            c.rows(),
            c.cols()
        )));
    }

    struct Search<'a, T> {
        c: &'a CostMatrix<T>,
        used: Vec<bool>,
        current: Vec<usize>,
        best: Option<(T, Vec<usize>)>,
    }

    impl<T: Real> Search<'_, T> {
        fn go(&mut self, row: usize, acc: T) {
            if row == self.c.rows() {
                if self.best.as_ref().is_none_or(|(b, _)| acc < *b) {
                    self.best = Some((acc, self.current.clone()));
                }
                return;
            }
            for j in 0..self.c.cols() {
                if !self.used[j] {
                    self.used[j] = true;
                    self.current.push(j);
                    self.go(row + 1, acc + self.c.get(row, j));
                    self.current.pop();
                    self.used[j] = false;
                }
            }
        }
    }

    let mut s = Search {
        c,
        used: vec![false; c.cols()],
        current: Vec::with_capacity(c.rows()),
        best: None,
    };
    s.go(0, T::zero());
    let (_, cols) = s.best.expect("at least one injection exists");
    Ok(Assignment::from_cols(c, cols))
}

/// Working state of one Jonker-Volgenant solve. Costs are shifted by the
/// global minimum so every entry is non-negative.
struct Jv<T> {
    rows: usize,
    cols: usize,
    cost: Vec<T>,
    /// column assigned to each row
    x: Vec<usize>,
    /// row assigned to each column
    y: Vec<usize>,
    /// column prices
    v: Vec<T>,
}

impl<T: Real> Jv<T> {
    fn new(c: &CostMatrix<T>) -> Self {
        let min = c.min_value();
        Jv {
            rows: c.rows(),
            cols: c.cols(),
            cost: c.values().iter().map(|&v| v - min).collect(),
            x: vec![NONE; c.rows()],
            y: vec![NONE; c.cols()],
            v: vec![T::zero(); c.cols()],
        }
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> T {
        self.cost[i * self.cols + j]
    }

    fn solve(mut self, square: bool) -> Vec<usize> {
        let mut free = if square {
            self.column_reduction()
        } else {
            (0..self.rows).collect()
        };
        for _ in 0..2 {
            if free.is_empty() {
                break;
            }
            free = self.augmenting_row_reduction(free);
        }
        for i in free {
            self.augment(i);
        }
        debug_assert!(self.x.iter().all(|&j| j != NONE));
        self.x
    }

    /// Column reduction and reduction transfer. Returns rows left free.
    #[allow(clippy::needless_range_loop)]
    fn column_reduction(&mut self) -> Vec<usize> {
        let n = self.cols;
        for j in 0..n {
            self.v[j] = T::infinity();
        }
        for i in 0..self.rows {
            for j in 0..n {
                let c = self.c(i, j);
                if c < self.v[j] {
                    self.v[j] = c;
                    self.y[j] = i;
                }
            }
        }
        let mut unique = vec![true; self.rows];
        for j in (0..n).rev() {
            let i = self.y[j];
            if self.x[i] == NONE {
                self.x[i] = j;
            } else {
                unique[i] = false;
                self.y[j] = NONE;
            }
        }
        let mut free = Vec::new();
        for i in 0..self.rows {
            if self.x[i] == NONE {
                free.push(i);
            } else if unique[i] && n > 1 {
                let j = self.x[i];
                let min = (0..n)
                    .filter(|&j2| j2 != j)
                    .map(|j2| self.c(i, j2) - self.v[j2])
                    .fold(T::infinity(), T::min);
                self.v[j] = self.v[j] - min;
            }
        }
        free
    }

    /// One pass of augmenting row reduction over `free`. Returns the rows
    /// still free afterwards.
    fn augmenting_row_reduction(&mut self, mut free: Vec<usize>) -> Vec<usize> {
        let n = self.cols;
        let n_free = free.len();
        let mut current = 0usize;
        let mut new_free = 0usize;
        let mut rr_count = 0usize;
        while current < n_free {
            rr_count += 1;
            let free_i = free[current];
            current += 1;

            let mut j1 = 0;
            let mut u1 = self.c(free_i, 0) - self.v[0];
            let mut j2 = NONE;
            let mut u2 = T::infinity();
            for j in 1..n {
                let h = self.c(free_i, j) - self.v[j];
                if h < u2 {
                    if h >= u1 {
                        u2 = h;
                        j2 = j;
                    } else {
                        u2 = u1;
                        u1 = h;
                        j2 = j1;
                        j1 = j;
                    }
                }
            }

            let mut i0 = self.y[j1];
            let lowered = if j2 == NONE { self.v[j1] } else { self.v[j1] - (u2 - u1) };
            let lowers = lowered < self.v[j1];
            if rr_count < current * n {
                if lowers {
                    self.v[j1] = lowered;
                } else if i0 != NONE && j2 != NONE {
                    j1 = j2;
                    i0 = self.y[j2];
                }
                if i0 != NONE {
                    if lowers {
                        current -= 1;
                        free[current] = i0;
                    } else {
                        free[new_free] = i0;
                        new_free += 1;
                    }
                }
            } else if i0 != NONE {
                free[new_free] = i0;
                new_free += 1;
            }
            self.x[free_i] = j1;
            self.y[j1] = free_i;
        }
        free.truncate(new_free);
        free
    }

    /// Dijkstra-style shortest augmenting path from free row `start`, then
    /// flips the path. Ties resolve to the first column in scan order.
    fn augment(&mut self, start: usize) {
        let n = self.cols;
        let mut todo: Vec<usize> = (0..n).collect();
        let mut pred = vec![start; n];
        let mut d: Vec<T> = (0..n).map(|j| self.c(start, j) - self.v[j]).collect();
        let (mut lo, mut hi) = (0usize, 0usize);
        let mut n_ready = 0usize;
        let mut sink = NONE;

        while sink == NONE {
            if lo == hi {
                n_ready = lo;
                hi = find_min_columns(lo, &d, &mut todo);
                for &j in &todo[lo..hi] {
                    if self.y[j] == NONE {
                        sink = j;
                    }
                }
            }
            if sink == NONE {
                sink = self.scan(&mut lo, &mut hi, &mut d, &mut todo, &mut pred);
            }
        }

        let mind = d[todo[lo]];
        for &j in &todo[..n_ready] {
            self.v[j] = self.v[j] + d[j] - mind;
        }

        let mut j = sink;
        loop {
            let i = pred[j];
            self.y[j] = i;
            let prev = self.x[i];
            self.x[i] = j;
            if i == start {
                break;
            }
            j = prev;
        }
    }

    /// Scans the rows assigned to columns `todo[lo..hi]`, relaxing the
    /// remaining columns. Returns an unassigned column reached at the
    /// current minimum distance, or `NONE`.
    // the ranges are fixed when a loop starts; growing them is deliberate
    #[allow(clippy::mut_range_bound)]
    fn scan(
        &self,
        lo: &mut usize,
        hi: &mut usize,
        d: &mut [T],
        todo: &mut [usize],
        pred: &mut [usize],
    ) -> usize {
        let n = self.cols;
        let (mut l, mut h) = (*lo, *hi);
        while l != h {
            let j = todo[l];
            l += 1;
            let i = self.y[j];
            let mind = d[j];
            let base = self.c(i, j) - self.v[j] - mind;
            for k in h..n {
                let j = todo[k];
                let reduced = self.c(i, j) - self.v[j] - base;
                if reduced < d[j] {
                    d[j] = reduced;
                    pred[j] = i;
                    if reduced == mind {
                        if self.y[j] == NONE {
                            return j;
                        }
                        todo[k] = todo[h];
                        todo[h] = j;
                        h += 1;
                    }
                }
            }
        }
        *lo = l;
        *hi = h;
        NONE
    }
}

/// Moves the columns of minimum `d` among `todo[lo..]` to the front of that
/// range; returns the end of the moved block.
#[allow(clippy::mut_range_bound)]
fn find_min_columns<T: Real>(lo: usize, d: &[T], todo: &mut [usize]) -> usize {
    let mut hi = lo + 1;
    let mut mind = d[todo[lo]];
    for k in hi..todo.len() {
        let j = todo[k];
        if d[j] <= mind {
            if d[j] < mind {
                hi = lo;
                mind = d[j];
            }
            todo[k] = todo[hi];
            todo[hi] = j;
            hi += 1;
        }
    }
    hi
}
