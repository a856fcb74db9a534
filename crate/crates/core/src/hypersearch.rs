//! Restarted alternating direction search over a finite `(s, p)` grid.
//!
//! From a starter the search sweeps `s` at fixed `p`, then `p` at fixed `s`,
//! and repeats until the point stops moving. It then scans every grid point
//! within `δ` of that point on both axes and restarts from the best of them
//! when it strictly beats the current accuracy. Every grid point is evaluated
//! at most once.
//!
//! A sweep only leaves the current point on a strict improvement; among
//! equally good improvers the smaller parameter value wins.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::par;

/// Slack used when matching values to grid points and testing δ-box
/// membership, so that `1.0:0.1:3.0` style grids behave as written.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    s_values: Vec<f64>,
    p_values: Vec<f64>,
    delta: f64,
}

impl SearchGrid {
    pub fn new(s_values: Vec<f64>, p_values: Vec<f64>, delta: f64) -> Result<Self> {
        check_axis("s", &s_values)?;
        check_axis("p", &p_values)?;
        if let Some(s) = s_values.iter().find(|&&s| s < 1.0) {
            return Err(Error::InvalidParameter(format!("grid value s = {s} is below 1")));
        }
        if let Some(p) = p_values.iter().find(|&&p| p <= 0.0) {
            return Err(Error::InvalidParameter(format!("grid value p = {p} is not positive")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must be > 0")));
        }
        Ok(SearchGrid {
            s_values,
            p_values,
            delta,
        })
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.s_values.len() * self.p_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest distance between two grid values on either axis.
    pub fn span(&self) -> f64 {
        let s = self.s_values.last().unwrap() - self.s_values[0];
        let p = self.p_values.last().unwrap() - self.p_values[0];
        s.max(p)
    }

    pub fn point(&self, i: usize, j: usize) -> GridPoint {
        GridPoint {
            i,
            j,
            s: self.s_values[i],
            p: self.p_values[j],
        }
    }

    /// Grid indices of `(s, p)`, or `None` when it is not a grid point.
    pub fn locate(&self, s: f64, p: f64) -> Option<(usize, usize)> {
        let find = |vals: &[f64], x: f64| vals.iter().position(|&v| (v - x).abs() <= GRID_TOL);
        Some((find(&self.s_values, s)?, find(&self.p_values, p)?))
    }
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} axis is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} axis has a non-finite value")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("{name} axis is not strictly ascending")));
    }
    Ok(())
}

/// Parses `start:step:end` (inclusive) or a comma-separated list.
pub fn parse_axis(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("cannot parse grid axis {text:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
                return Err(bad());
            }
            let count = ((b - a) / step + GRID_TOL).floor() as usize + 1;
            // built by index and rounded so that 0.1 steps land on 1.1, 1.2, …
            Ok((0..count)
                .map(|k| ((a + k as f64 * step) * 1e10).round() / 1e10)
                .collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub i: usize,
    pub j: usize,
    pub s: f64,
    pub p: f64,
}

/// What produced a search-path entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    SweepS,
    SweepP,
    Box,
    /// A starter: the initial point, or a δ-box winner the search restarts from.
    Restart,
    /// One point of an exhaustive scan.
    Grid,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::SweepS => "sweep-s",
            StepKind::SweepP => "sweep-p",
            StepKind::Box => "box",
            StepKind::Restart => "restart",
            StepKind::Grid => "grid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEntry {
    pub step: usize,
    pub kind: StepKind,
    pub s: f64,
    pub p: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_s: f64,
    pub best_p: f64,
    pub best_accuracy: f64,
    /// Every first evaluation in order, plus one `restart` entry per starter.
    pub path: Vec<PathEntry>,
    /// Distinct grid points evaluated.
    pub evaluations: usize,
    /// Starters visited, beginning with the initial one.
    pub starters: Vec<GridPoint>,
}

struct Search<'a, E> {
    grid: &'a SearchGrid,
    eval: &'a E,
    cache: HashMap<(usize, usize), f64>,
    path: Vec<PathEntry>,
}

impl<E> Search<'_, E>
where
    E: Fn(f64, f64) -> Result<f64> + Sync,
{
    /// Evaluates the uncached points concurrently, then records them in order.
    fn evaluate(&mut self, points: &[(usize, usize)], kind: StepKind) -> Result<Vec<f64>> {
        let mut fresh: Vec<(usize, usize)> = Vec::new();
        for &pt in points {
            if !self.cache.contains_key(&pt) && !fresh.contains(&pt) {
                fresh.push(pt);
            }
        }
        let grid = self.grid;
        let eval = self.eval;
        let values = par::map(&fresh, |&(i, j)| eval(grid.s_values[i], grid.p_values[j]));
        for (&(i, j), value) in fresh.iter().zip(values) {
            let acc = value?;
            if !acc.is_finite() {
                return Err(Error::InvalidState(format!(
                    "evaluator returned {acc} at s = {}, p = {}",
                    grid.s_values[i], grid.p_values[j]
                )));
            }
            self.cache.insert((i, j), acc);
            self.log(kind, (i, j), acc);
        }
        Ok(points.iter().map(|pt| self.cache[pt]).collect())
    }

    fn log(&mut self, kind: StepKind, (i, j): (usize, usize), accuracy: f64) {
        self.path.push(PathEntry {
            step: self.path.len(),
            kind,
            s: self.grid.s_values[i],
            p: self.grid.p_values[j],
            accuracy,
        });
    }

    /// Best of `points` given the current point and its accuracy: the
    /// current point stays unless some candidate is strictly better.
    /// Points come in ascending order, so the first strict maximum is the
    /// one with the smaller parameter values.
    fn pick(&self, points: &[(usize, usize)], values: &[f64], current: (usize, usize), acc: f64) -> ((usize, usize), f64) {
        let mut best = (current, acc);
        for (&pt, &v) in points.iter().zip(values) {
            if v > best.1 {
                best = (pt, v);
            }
        }
        best
    }
}

/// Restarted alternating direction search from `start`, which must be a
/// grid point. The evaluator should be a pure function of `(s, p)`.
pub fn search<E>(grid: &SearchGrid, evaluator: E, start: (f64, f64)) -> Result<SearchResult>
where
    E: Fn(f64, f64) -> Result<f64> + Sync,
{
    let mut cur = grid.locate(start.0, start.1).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "starter (s = {}, p = {}) is not on the grid",
            start.0, start.1
        ))
    })?;
    let mut st = Search {
        grid,
        eval: &evaluator,
        cache: HashMap::new(),
        path: Vec::new(),
    };
    let mut acc = st.evaluate(&[cur], StepKind::Restart)?[0];
    let mut starters = vec![grid.point(cur.0, cur.1)];
    let (ns, np) = (grid.s_values.len(), grid.p_values.len());

    loop {
        // alternate sweeps until neither moves the point
        loop {
            let row: Vec<(usize, usize)> = (0..ns).map(|i| (i, cur.1)).collect();
            let values = st.evaluate(&row, StepKind::SweepS)?;
            let (half, acc_half) = st.pick(&row, &values, cur, acc);

            let col: Vec<(usize, usize)> = (0..np).map(|j| (half.0, j)).collect();
            let values = st.evaluate(&col, StepKind::SweepP)?;
            let (next, acc_next) = st.pick(&col, &values, half, acc_half);

            let fixed = next == cur && acc_next == acc;
            cur = next;
            acc = acc_next;
            if fixed {
                break;
            }
        }

        let (s1, p1) = (grid.s_values[cur.0], grid.p_values[cur.1]);
        let reach = grid.delta + GRID_TOL;
        let boxed: Vec<(usize, usize)> = (0..ns)
            .filter(|&i| (grid.s_values[i] - s1).abs() <= reach)
            .flat_map(|i| {
                (0..np)
                    .filter(move |&j| (grid.p_values[j] - p1).abs() <= reach)
                    .map(move |j| (i, j))
            })
            .collect();
        let values = st.evaluate(&boxed, StepKind::Box)?;
        let (winner, acc_box) = st.pick(&boxed, &values, cur, acc);
        if acc_box <= acc {
            break;
        }
        cur = winner;
        acc = acc_box;
        starters.push(grid.point(cur.0, cur.1));
        st.log(StepKind::Restart, cur, acc);
    }

    Ok(SearchResult {
        best_s: grid.s_values[cur.0],
        best_p: grid.p_values[cur.1],
        best_accuracy: acc,
        evaluations: st.cache.len(),
        path: st.path,
        starters,
    })
}

/// Evaluates every grid point; ties go to the smallest `s`, then the
/// smallest `p`.
pub fn exhaustive<E>(grid: &SearchGrid, evaluator: E) -> Result<SearchResult>
where
    E: Fn(f64, f64) -> Result<f64> + Sync,
{
    let mut st = Search {
        grid,
        eval: &evaluator,
        cache: HashMap::new(),
        path: Vec::new(),
    };
    let (ns, np) = (grid.s_values.len(), grid.p_values.len());
    let all: Vec<(usize, usize)> = (0..ns).flat_map(|i| (0..np).map(move |j| (i, j))).collect();
    let values = st.evaluate(&all, StepKind::Grid)?;
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    let (i, j) = all[best];
    Ok(SearchResult {
        best_s: grid.s_values[i],
        best_p: grid.p_values[j],
        best_accuracy: values[best],
        evaluations: st.cache.len(),
        path: st.path,
        starters: vec![],
    })
}
