use super::{check_ls_input, norm2, Matrix, Vector, EPS};
use crate::error::Result;

/// Householder QR with column pivoting.
struct PivotedQr {
    /// Upper triangle holds R; below the diagonal are the reflector tails.
    qr: Matrix,
    /// Leading entries of the Householder vectors.
    heads: Vec<f64>,
    /// Reflector scaling `2 / (v^T v)`, zero for skipped reflections.
    taus: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    fn new(a: &Matrix) -> Self {
        let (n, p) = a.dims();
        let steps = n.min(p);
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut heads = vec![0.0; steps];
        let mut taus = vec![0.0; steps];
        let mut col = vec![0.0; n];
        for k in 0..steps {
            // Remaining column norms are recomputed rather than downdated; p is tiny.
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..p {
                for i in k..n {
                    col[i - k] = qr[(i, j)];
                }
                let nrm = norm2(&col[..n - k]);
                if nrm > best_norm {
                    best_norm = nrm;
                    best = j;
                }
            }
            if best != k {
                for i in 0..n {
                    let t = qr[(i, k)];
                    qr[(i, k)] = qr[(i, best)];
                    qr[(i, best)] = t;
                }
                perm.swap(k, best);
            }
            if best_norm == 0.0 {
                continue;
            }
            let alpha = if qr[(k, k)] >= 0.0 { -best_norm } else { best_norm };
            let head = qr[(k, k)] - alpha;
            let mut vtv = head * head;
            for i in k + 1..n {
                vtv += qr[(i, k)] * qr[(i, k)];
            }
            qr[(k, k)] = alpha;
            heads[k] = head;
            if vtv == 0.0 {
                continue;
            }
            let tau = 2.0 / vtv;
            taus[k] = tau;
            for j in k + 1..p {
                let mut s = head * qr[(k, j)];
                for i in k + 1..n {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau;
                qr[(k, j)] -= s * head;
                for i in k + 1..n {
                    let v = qr[(i, k)];
                    qr[(i, j)] -= s * v;
                }
            }
        }
        Self { qr, heads, taus, perm }
    }

    /// Applies `Q^T` to `y` in place.
    fn apply_qt(&self, y: &mut Vector) {
        let n = self.qr.rows();
        for k in 0..self.heads.len() {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            let head = self.heads[k];
            let mut s = head * y[k];
            for i in k + 1..n {
                s += self.qr[(i, k)] * y[i];
            }
            s *= tau;
            y[k] -= s * head;
            for i in k + 1..n {
                y[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Numerical rank: `|R_ii| > tol * |R_11|`.
    fn rank(&self, tol: f64) -> usize {
        let steps = self.heads.len();
        if steps == 0 {
            return 0;
        }
        let r11 = self.qr[(0, 0)].abs();
        if r11 == 0.0 {
            return 0;
        }
        (0..steps)
            .take_while(|&i| self.qr[(i, i)].abs() > tol * r11)
            .count()
    }
}

/// Rank cutoff `max(n, p) * 2^-52 * 64` relative to the leading pivot.
pub(crate) fn rank_tolerance(n: usize, p: usize) -> f64 {
    n.max(p) as f64 * EPS * 64.0
}

/// Minimizes `||R beta + rhs||` with column-pivoted QR.
///
/// Columns whose pivoted diagonal falls under the rank tolerance get zero
/// weight, so a rank-deficient `R` yields a basic solution.
pub fn qr_least_squares(r: &Matrix, rhs: &Vector) -> Result<Vector> {
    check_ls_input(r, rhs)?;
    let (n, p) = r.dims();
    let f = PivotedQr::new(r);
    let rank = f.rank(rank_tolerance(n, p));
    let mut y = rhs.scale(-1.0);
    f.apply_qt(&mut y);
    let mut z = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = y[i];
        for j in i + 1..rank {
            s -= f.qr[(i, j)] * z[j];
        }
        z[i] = s / f.qr[(i, i)];
    }
    let mut beta = Vector::zeros(p);
    for (i, zi) in z.into_iter().enumerate() {
        beta[f.perm[i]] = zi;
    }
    Ok(beta)
}
