//! Small dense kernels: Householder QR with a fixed sign convention, a sorted
//! symmetric eigensolver and orthogonal Procrustes alignment.

use nalgebra::{DMatrix, SymmetricEigen};

/// Full orthogonal-triangular factorization `A = Q R` of an `n x m` matrix.
#[derive(Debug, Clone)]
pub struct QrFactors {
    /// `n x n` orthogonal.
    pub q: DMatrix<f64>,
    /// `n x m` upper triangular.
    pub r: DMatrix<f64>,
}

/// How the signs of the QR factors are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QrSigns {
    /// `diag(R) >= 0`; exact zeros keep the reflector's sign.
    #[default]
    NonNegativeDiagonal,
    /// Whatever the Householder reflectors produce.
    Reflector,
}

/// Full Householder QR. Reflectors use `alpha = -sign(x_0) |x|` for stability;
/// the requested sign convention is applied afterwards by flipping rows of `R`
/// together with the matching columns of `Q`.
pub fn householder_qr(a: &DMatrix<f64>, signs: QrSigns) -> QrFactors {
    let (n, m) = a.shape();
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let mut v = vec![0.0; n];
    let steps = m.min(n.saturating_sub(1));
    for k in 0..steps {
        let norm = (k..n).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        v[k] = x0 - alpha;
        for i in k + 1..n {
            v[i] = r[(i, k)];
        }
        let vtv: f64 = (k..n).map(|i| v[i] * v[i]).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for j in k + 1..m {
            let dot: f64 = (k..n).map(|i| v[i] * r[(i, j)]).sum();
            let s = beta * dot;
            for i in k..n {
                r[(i, j)] -= s * v[i];
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
        // Q <- Q H
        for row in 0..n {
            let dot: f64 = (k..n).map(|i| q[(row, i)] * v[i]).sum();
            let s = beta * dot;
            for i in k..n {
                q[(row, i)] -= s * v[i];
            }
        }
    }
    if signs == QrSigns::NonNegativeDiagonal {
        for k in 0..m.min(n) {
            if r[(k, k)] < 0.0 {
                for j in 0..m {
                    r[(k, j)] = -r[(k, j)];
                }
                for i in 0..n {
                    q[(i, k)] = -q[(i, k)];
                }
            }
        }
    }
    QrFactors { q, r }
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending (ties by original
/// index). Each eigenvector is oriented so that its largest-magnitude entry is
/// positive, the lowest index winning ties.
pub fn symmetric_eigen_desc(b: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = b.nrows();
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let src = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for i in 1..n {
            if src[i].abs() > src[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if src[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, col)] = flip * src[i];
        }
    }
    (values, vectors)
}

/// Root-mean-square distance between the rows of `y` and `z` after centering
/// both and rotating `z` by the optimal orthogonal matrix.
pub fn procrustes_rms(y: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    assert_eq!(y.shape(), z.shape(), "procrustes inputs must have equal shapes");
    let n = y.nrows();
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for j in 0..m.ncols() {
            let mean = m.column(j).sum() / n as f64;
            c.column_mut(j).add_scalar_mut(-mean);
        }
        c
    };
    let yc = center(y);
    let zc = center(z);
    let svd = (zc.transpose() * &yc).svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let aligned = zc * (u * vt);
    ((yc - aligned).norm_squared() / n as f64).sqrt()
}
