use super::{two_cluster_gain_at, TheoryError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeClusterParams {
    pub p: [f64; 3],
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
}

impl ThreeClusterParams {
    pub fn new(p1: f64, p2: f64, p3: f64, n: usize, eps: f64, delta: f64) -> Self {
        ThreeClusterParams {
            p: [p1, p2, p3],
            n,
            eps,
            delta,
        }
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(TheoryError::Domain(format!(
                "fractions {:?} not in [0, 1]",
                self.p
            )));
        }
        let s: f64 = self.p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(TheoryError::Domain(format!("fractions sum to {s}, not 1")));
        }
        if self.n == 0 {
            return Err(TheoryError::Domain("n must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(TheoryError::Domain(format!(
                "eps = {} not in (0, 1)",
                self.eps
            )));
        }
        if !(self.delta > 1.0 + self.eps && self.delta < 2.0) {
            return Err(TheoryError::OutOfModel(format!(
                "need 1 + eps < delta < 2, got eps = {}, delta = {}",
                self.eps, self.delta
            )));
        }
        Ok(())
    }
}

/// Ordered cluster pairs `(i, j)`, zero-based, in the order they appear in
/// every recurrence.
const PAIRS: [(usize, usize); 6] = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];

/// Winner of a child pair `(i, j)` given its parent's winner `c`.
fn child_winner(c: usize, i: usize, j: usize) -> usize {
    if i == c {
        i
    } else if j == c {
        j
    } else {
        i
    }
}

/// The 12 fork-tree unknowns `alpha^w_{ij}`: the expected number of
/// cluster-1 blocks on the longest chain in the subtree below a node `(i, j)`
/// won by `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSystem {
    pub p: [f64; 3],
    /// Row-major `A` in `A x = b`.
    pub matrix: [[f64; 12]; 12],
    pub rhs: [f64; 12],
}

impl AlphaSystem {
    /// Position of `alpha^w_{ij}` in the unknown vector. `w` must be `i` or
    /// `j`.
    pub fn index(w: usize, i: usize, j: usize) -> usize {
        let pair = PAIRS.iter().position(|&q| q == (i, j)).expect("i != j");
        assert!(w == i || w == j, "winner must be one of the pair");
        2 * pair + usize::from(w == j)
    }

    /// `(w, i, j)` for every unknown, in index order.
    pub fn unknowns() -> [(usize, usize, usize); 12] {
        let mut out = [(0, 0, 0); 12];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            out[2 * k] = (i, i, j);
            out[2 * k + 1] = (j, i, j);
        }
        out
    }

    pub fn build(p: [f64; 3]) -> Self {
        let mut matrix = [[0.0; 12]; 12];
        let mut rhs = [0.0; 12];
        for (row, (w, _, _)) in Self::unknowns().into_iter().enumerate() {
            matrix[row][row] += 1.0;
            rhs[row] = if w == 0 { 1.0 } else { 0.0 };
            for &(k, l) in &PAIRS {
                let col = Self::index(child_winner(w, k, l), k, l);
                matrix[row][col] -= p[k] * p[l];
            }
        }
        AlphaSystem { p, matrix, rhs }
    }

    /// Gaussian elimination with partial pivoting.
    pub fn solve(&self) -> Result<[f64; 12], TheoryError> {
        let mut a = self.matrix;
        let mut b = self.rhs;
        let (mut max_pivot, mut min_pivot) = (0.0f64, f64::INFINITY);
        for col in 0..12 {
            let piv = (col..12)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            let d = a[col][col];
            max_pivot = max_pivot.max(d.abs());
            min_pivot = min_pivot.min(d.abs());
            if d.abs() < 1e-300 {
                return Err(TheoryError::Singular { ratio: 0.0 });
            }
            for r in (col + 1)..12 {
                let f = a[r][col] / d;
                if f != 0.0 {
                    for c in col..12 {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        let ratio = min_pivot / max_pivot;
        if ratio < 1e-12 {
            return Err(TheoryError::Singular { ratio });
        }
        let mut x = [0.0; 12];
        for r in (0..12).rev() {
            let s: f64 = ((r + 1)..12).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        Ok(x)
    }

    /// Largest absolute recurrence residual of `x`.
    pub fn residual(&self, x: &[f64; 12]) -> f64 {
        (0..12)
            .map(|r| {
                let lhs: f64 = (0..12).map(|c| self.matrix[r][c] * x[c]).sum();
                (lhs - self.rhs[r]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterExpectation {
    /// Expected longest-chain blocks per phase mined by each cluster.
    pub m: [f64; 3],
    /// Per-miner longest-chain fraction in each cluster.
    pub f: [f64; 3],
    /// `n * f`, relative to the fair share.
    pub gain: [f64; 3],
    /// Worst recurrence residual over the three solves.
    pub residual: f64,
}

/// `E[M_1]` for fractions `p`, plus the residual of the underlying solve.
///
/// The fork-phase sum is divided by the probability mass `sum p_k^2` of the
/// fork-ending pairs it ranges over, which makes `p_3 = 0` coincide with the
/// two-cluster closed form.
fn expected_m1(p: [f64; 3]) -> Result<(f64, f64), TheoryError> {
    let sys = AlphaSystem::build(p);
    let alpha = sys.solve()?;
    let residual = sys.residual(&alpha);
    let mut fork = 0.0;
    for c in 0..3 {
        let inner: f64 = PAIRS
            .iter()
            .map(|&(k, l)| p[k] * p[l] * alpha[AlphaSystem::index(child_winner(c, k, l), k, l)])
            .sum();
        fork += p[c] * p[c] * inner;
    }
    let mass: f64 = p.iter().map(|x| x * x).sum();
    Ok((fork / mass + p[0] * p[0] / (1.0 - p[0]), residual))
}

fn permuted(p: [f64; 3], c: usize) -> [f64; 3] {
    match c {
        0 => p,
        1 => [p[1], p[0], p[2]],
        _ => [p[2], p[1], p[0]],
    }
}

/// Per-cluster expectations for three clusters. Zero fractions reduce to
/// the two-cluster (or single-cluster) case.
pub fn three_cluster_f(params: &ThreeClusterParams) -> Result<ClusterExpectation, TheoryError> {
    params.validate()?;
    let p = params.p;
    let n = params.n as f64;
    let zeros = p.iter().filter(|&&x| x == 0.0).count();
    if zeros > 0 {
        let mut gain = [0.0; 3];
        let live: Vec<usize> = (0..3).filter(|&i| p[i] > 0.0).collect();
        match live.as_slice() {
            [only] => gain[*only] = 1.0,
            [a, b] => {
                gain[*a] = two_cluster_gain_at(p[*a]);
                gain[*b] = two_cluster_gain_at(p[*b]);
            }
            _ => unreachable!(),
        }
        let f = gain.map(|g| g / n);
        // expected blocks proportional to cluster share of the chain
        let m = [0, 1, 2].map(|i| p[i] * gain[i]);
        return Ok(ClusterExpectation {
            m,
            f,
            gain,
            residual: 0.0,
        });
    }
    if p.iter().any(|&x| x >= 1.0) {
        return Err(TheoryError::Domain(
            "a fraction of 1 leaves no fork phases".into(),
        ));
    }
    let mut m = [0.0; 3];
    let mut residual: f64 = 0.0;
    for c in 0..3 {
        let (mc, r) = expected_m1(permuted(p, c))?;
        m[c] = mc;
        residual = residual.max(r);
    }
    let total: f64 = m.iter().sum();
    let f = [0, 1, 2].map(|c| m[c] / (p[c] * n * total));
    Ok(ClusterExpectation {
        m,
        f,
        gain: f.map(|x| x * n),
        residual,
    })
}

/// Gain of a cluster-1 miner when clusters 1 and 2 each hold `p_each`.
pub fn two_equal_dominant_gain(p_each: f64, n: usize) -> Result<f64, TheoryError> {
    if !(p_each > 0.0 && p_each < 0.5) {
        return Err(TheoryError::Domain(format!(
            "p_each = {p_each} not in (0, 0.5)"
        )));
    }
    let params = ThreeClusterParams::new(p_each, p_each, 1.0 - 2.0 * p_each, n, 0.3, 1.5);
    Ok(three_cluster_f(&params)?.gain[0])
}
