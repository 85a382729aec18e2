//! Zero-sum matrix games: storage, minimax by linear programming, and the
//! best-response structure of a fixed optimizer strategy.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::check_simplex;
use crate::rng::rng_from_seed;

pub const DEFAULT_BR_TOL: f64 = 1e-7;

/// Payoff matrix `A` (optimizer rows, learner columns) with entries in `[-1, 1]`.
/// The learner's matrix is always `-A` and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSumGame {
    n: usize,
    m: usize,
    a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

impl ZeroSumGame {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain("game needs at least one row".into()));
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::Domain("game needs at least one column".into()));
        }
        let mut a = Vec::with_capacity(n * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::Domain(format!(
                    "ragged payoff matrix: row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(Error::Domain(format!("entry A[{i}][{j}] = {v} outside [-1, 1]")));
                }
                a.push(v);
            }
        }
        Ok(ZeroSumGame { n, m, a })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        Self::new(file.a)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GameFile { a: self.rows() }).expect("finite matrix serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn matching_pennies() -> Self {
        Self::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// `A^T x`: the learner's loss vector against `x`.
    pub fn at_x(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (vj, aij) in v.iter_mut().zip(self.row(i)) {
                    *vj += xi * aij;
                }
            }
        }
        v
    }

    /// `A y`: the optimizer's payoff vector against `y`.
    pub fn a_y(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn payoff(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.a_y(y)).map(|(a, b)| a * b).sum()
    }

    /// `-A^T`, the game seen from the learner's side.
    pub fn negated_transpose(&self) -> Self {
        let rows = (0..self.m).map(|j| (0..self.n).map(|i| -self.get(i, j)).collect()).collect();
        Self::new(rows).unwrap()
    }

    /// `max_i min_j A_ij`.
    pub fn lower_pure_value(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().copied().fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_j max_i A_ij`.
    pub fn upper_pure_value(&self) -> f64 {
        (0..self.m)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub value: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
}

/// Minimax value and a pair of optimal strategies.
///
/// With `A' = A + 2` (entries in `[1, 3]`) the column player's problem
/// `max 1^T w  s.t.  A' w <= 1, w >= 0` has the origin as a feasible basis, so
/// a single simplex phase suffices. Then `value(A') = 1 / sum(w)`,
/// `y* = w value(A')`, and the optimizer's strategy is read off the slack
/// duals.
pub fn solve_minimax(g: &ZeroSumGame) -> Result<GameSolution> {
    const SHIFT: f64 = 2.0;
    let (n, m) = (g.n(), g.m());
    let cols = m + n;
    let width = cols + 1;
    // Rows 0..n are constraints, row n is the objective `z - 1^T w = 0`.
    let mut tab = vec![0.0; (n + 1) * width];
    for i in 0..n {
        for j in 0..m {
            tab[i * width + j] = g.get(i, j) + SHIFT;
        }
        tab[i * width + m + i] = 1.0;
        tab[i * width + cols] = 1.0;
    }
    for j in 0..m {
        tab[n * width + j] = -1.0;
    }
    let mut basis: Vec<usize> = (m..m + n).collect();

    const EPS: f64 = 1e-12;
    let max_iters = 50 * (n + m) + 1000;
    let mut iters = 0;
    loop {
        // Bland: lowest-index column with negative reduced cost.
        let Some(enter) = (0..cols).find(|&c| tab[n * width + c] < -EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..n {
            let piv = tab[r * width + enter];
            if piv > EPS {
                let ratio = tab[r * width + cols] / piv;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - EPS || (ratio <= lratio + EPS && basis[r] < basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((pr, _)) = leave else {
            return Err(Error::Lp("unbounded column problem; shifted matrix must be positive".into()));
        };
        pivot(&mut tab, width, n + 1, pr, enter);
        basis[pr] = enter;
        iters += 1;
        if iters > max_iters {
            return Err(Error::Lp(format!("simplex exceeded {max_iters} pivots")));
        }
    }

    let mut w = vec![0.0; m];
    for (r, &b) in basis.iter().enumerate() {
        if b < m {
            w[b] = tab[r * width + cols].max(0.0);
        }
    }
    let duals: Vec<f64> = (0..n).map(|i| tab[n * width + m + i].max(0.0)).collect();
    let sw: f64 = w.iter().sum();
    let sp: f64 = duals.iter().sum();
    if !(sw > 0.0 && sp > 0.0) {
        return Err(Error::Lp("degenerate optimal basis".into()));
    }
    let y_star: Vec<f64> = w.iter().map(|v| v / sw).collect();
    let x_star: Vec<f64> = duals.iter().map(|v| v / sp).collect();
    let value = 1.0 / sw - SHIFT;
    Ok(GameSolution { value, x_star, y_star })
}

fn pivot(tab: &mut [f64], width: usize, rows: usize, pr: usize, pc: usize) {
    let p = tab[pr * width + pc];
    for c in 0..width {
        tab[pr * width + c] /= p;
    }
    tab[pr * width + pc] = 1.0;
    for r in 0..rows {
        if r == pr {
            continue;
        }
        let f = tab[r * width + pc];
        if f != 0.0 {
            for c in 0..width {
                tab[r * width + c] -= f * tab[pr * width + c];
            }
            tab[r * width + pc] = 0.0;
        }
    }
}

/// Suboptimality structure of the learner's actions against a fixed `x_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub v: Vec<f64>,
    pub v_star: f64,
    pub gaps: Vec<f64>,
    pub br_set: Vec<usize>,
    pub k: usize,
    /// `None` when every action is a best response.
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
}

impl GapProfile {
    pub fn m(&self) -> usize {
        self.v.len()
    }

    pub fn is_best_response(&self, i: usize) -> bool {
        self.br_set.binary_search(&i).is_ok()
    }

    /// Suboptimal actions (the complement of the best-response set).
    pub fn suboptimal(&self) -> Vec<usize> {
        (0..self.m()).filter(|&i| !self.is_best_response(i)).collect()
    }

    /// Builds a profile directly from a loss vector `v`.
    pub fn from_values(v: Vec<f64>, br_tol: f64) -> Self {
        let v_star = v.iter().copied().fold(f64::INFINITY, f64::min);
        let gaps: Vec<f64> = v.iter().map(|x| (x - v_star).max(0.0)).collect();
        let br_set: Vec<usize> = (0..v.len()).filter(|&i| gaps[i] <= br_tol).collect();
        let k = br_set.len();
        let off: Vec<f64> = gaps.iter().copied().filter(|&d| d > br_tol).collect();
        let (delta_min, delta_max) = if off.is_empty() {
            (None, None)
        } else {
            (
                Some(off.iter().copied().fold(f64::INFINITY, f64::min)),
                Some(off.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            )
        };
        GapProfile { v, v_star, gaps, br_set, k, delta_min, delta_max }
    }
}

pub fn gap_profile(g: &ZeroSumGame, x_hat: &[f64], br_tol: f64) -> Result<GapProfile> {
    check_simplex(x_hat, g.n(), 1e-9, "x_hat")?;
    Ok(GapProfile::from_values(g.at_x(x_hat), br_tol))
}

/// True iff some entry is the minimum of its row and the maximum of its column.
pub fn has_pure_nash(g: &ZeroSumGame) -> bool {
    let col_max: Vec<f64> = (0..g.m())
        .map(|j| (0..g.n()).map(|i| g.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    (0..g.n()).any(|i| {
        let row = g.row(i);
        let row_min = row.iter().copied().fold(f64::INFINITY, f64::min);
        (0..g.m()).any(|j| row[j] == row_min && row[j] == col_max[j])
    })
}

/// Smallest separation between two entries of the same row.
pub fn row_gap_min(g: &ZeroSumGame) -> Result<f64> {
    if g.m() < 2 {
        return Err(Error::Domain("row gap needs at least two columns".into()));
    }
    let mut best = f64::INFINITY;
    for i in 0..g.n() {
        let mut row = g.row(i).to_vec();
        row.sort_by(|a, b| a.total_cmp(b));
        for w in row.windows(2) {
            best = best.min(w[1] - w[0]);
        }
    }
    Ok(best)
}

/// I.i.d. `Unif[-1, 1]` entries from a ChaCha8 stream seeded by `seed`.
pub fn random_game(n: usize, m: usize, seed: u64) -> Result<ZeroSumGame> {
    if n == 0 || m == 0 {
        return Err(Error::Domain("random game dimensions must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let rows = (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    ZeroSumGame::new(rows)
}
