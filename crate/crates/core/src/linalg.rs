//! Dense kernels for the small matrices the sampler factorizes: the q×q and
//! (q+1)×(q+1) posterior precisions, Procrustes cores and the D×D
//! covariance used when fitting reference loadings.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Lower Cholesky factor `L` with `a = L Lᵀ`.
pub fn cholesky<T: Real>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > T::zero()) {
            return Err(Error::Numerical(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let djj = diag.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_subst<T: Real>(l: ArrayView2<'_, T>, b: &mut [T]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn backward_subst_t<T: Real>(l: ArrayView2<'_, T>, b: &mut [T]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Solves `(L Lᵀ) x = b` in place.
pub fn chol_solve<T: Real>(l: ArrayView2<'_, T>, b: &mut [T]) {
    forward_subst(l, b);
    backward_subst_t(l, b);
}

/// ln det(L Lᵀ).
pub fn chol_logdet<T: Real>(l: ArrayView2<'_, T>) -> T {
    let two = T::one() + T::one();
    l.diag().iter().map(|&d| two * d.ln()).sum()
}

/// Inverse of an SPD matrix through its Cholesky factor.
pub fn chol_inverse<T: Real>(l: ArrayView2<'_, T>) -> Array2<T> {
    let n = l.nrows();
    let mut inv = Array2::<T>::zeros((n, n));
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = T::zero());
        col[j] = T::one();
        chol_solve(l, &mut col);
        for i in 0..n {
            inv[[i, j]] = col[i];
        }
    }
    inv
}

pub fn dot<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in decreasing order and the matching unit
/// eigenvectors as columns.
pub fn sym_eigen<T: Real>(a: ArrayView2<'_, T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        let scale: T = m.iter().map(|&x| x * x).sum();
        if off <= eps * eps * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let two = T::one() + T::one();
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}

/// Thin SVD `m = U diag(s) Vᵀ` of a small matrix (rows ≥ cols) by one-sided
/// Jacobi. Columns of `U` belonging to zero singular values are completed
/// to an orthonormal set.
pub fn svd_small<T: Real>(m: ArrayView2<'_, T>) -> (Array2<T>, Array1<T>, Array2<T>) {
    let (rows, cols) = m.dim();
    assert!(rows >= cols, "svd_small expects rows >= cols");
    let mut a = m.to_owned();
    let mut v = Array2::<T>::eye(cols);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha: T = a.column(p).iter().map(|&x| x * x).sum();
                let beta: T = a.column(q).iter().map(|&x| x * x).sum();
                let gamma = dot(a.column(p), a.column(q));
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let two = T::one() + T::one();
                let zeta = (beta - alpha) / (two * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..cols {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s = Array1::<T>::zeros(cols);
    let mut u = Array2::<T>::zeros((rows, cols));
    let norm_max = (0..cols)
        .map(|k| a.column(k).iter().map(|&x| x * x).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    let tol = norm_max * eps * T::of(rows.max(1) as f64);
    let mut deficient = Vec::new();
    for k in 0..cols {
        let norm = a.column(k).iter().map(|&x| x * x).sum::<T>().sqrt();
        s[k] = norm;
        if norm > tol && norm > T::zero() {
            for r in 0..rows {
                u[[r, k]] = a[[r, k]] / norm;
            }
        } else {
            deficient.push(k);
        }
    }
    // Complete U by Gram-Schmidt against the standard basis.
    let mut e = 0;
    for k in deficient {
        while e < rows {
            let mut cand = Array1::<T>::zeros(rows);
            cand[e] = T::one();
            e += 1;
            for j in 0..cols {
                if j == k {
                    continue;
                }
                let proj = dot(cand.view(), u.column(j));
                for r in 0..rows {
                    cand[r] = cand[r] - proj * u[[r, j]];
                }
            }
            let norm = cand.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > T::of(1e-3) {
                u.column_mut(k).assign(&(cand / norm));
                break;
            }
        }
    }
    // Sort singular values in decreasing order.
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    let s_sorted = Array1::from_iter(order.iter().map(|&i| s[i]));
    let mut u_sorted = Array2::<T>::zeros((rows, cols));
    let mut v_sorted = Array2::<T>::zeros((cols, cols));
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.column_mut(dst).assign(&u.column(src));
        v_sorted.column_mut(dst).assign(&v.column(src));
    }
    (u_sorted, s_sorted, v_sorted)
}
