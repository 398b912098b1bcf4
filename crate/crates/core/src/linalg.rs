//! Small dense linear algebra on fixed-size arrays.
//!
//! Everything here works on `[T; D]` vectors and `[[T; D]; D]` matrices with `D` a
//! compile-time dimension. The few places that need a runtime dimension (spacetime
//! blocks of size `D + 1`, block-tridiagonal solves) use the `dyn_*` helpers.

use crate::scalar::Real;

pub type Vector<T, const D: usize> = [T; D];
pub type Matrix<T, const D: usize> = [[T; D]; D];

#[inline]
pub fn zero<T: Real, const D: usize>() -> Vector<T, D> {
    [T::zero(); D]
}

#[inline]
pub fn unit<T: Real, const D: usize>(axis: usize) -> Vector<T, D> {
    let mut e = [T::zero(); D];
    e[axis] = T::one();
    e
}

#[inline]
pub fn identity<T: Real, const D: usize>() -> Matrix<T, D> {
    let mut m = [[T::zero(); D]; D];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

#[inline]
pub fn diag<T: Real, const D: usize>(d: [T; D]) -> Matrix<T, D> {
    let mut m = [[T::zero(); D]; D];
    for i in 0..D {
        m[i][i] = d[i];
    }
    m
}

#[inline]
pub fn add<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>) -> Vector<T, D> {
    std::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn sub<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>) -> Vector<T, D> {
    std::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn scale<T: Real, const D: usize>(a: &Vector<T, D>, s: T) -> Vector<T, D> {
    std::array::from_fn(|i| a[i] * s)
}

/// `a + s * b`
#[inline]
pub fn axpy<T: Real, const D: usize>(a: &Vector<T, D>, s: T, b: &Vector<T, D>) -> Vector<T, D> {
    std::array::from_fn(|i| a[i] + s * b[i])
}

#[inline]
pub fn lerp<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>, s: T) -> Vector<T, D> {
    std::array::from_fn(|i| a[i] + s * (b[i] - a[i]))
}

#[inline]
pub fn dot<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>) -> T {
    let mut s = T::zero();
    for i in 0..D {
        s = s + a[i] * b[i];
    }
    s
}

#[inline]
pub fn norm<T: Real, const D: usize>(a: &Vector<T, D>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>) -> T {
    norm(&sub(a, b))
}

#[inline]
pub fn max_abs<T: Real, const D: usize>(a: &Vector<T, D>) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

#[inline]
pub fn mat_vec<T: Real, const D: usize>(m: &Matrix<T, D>, v: &Vector<T, D>) -> Vector<T, D> {
    std::array::from_fn(|i| dot(&m[i], v))
}

/// Bilinear form `u^T m v`.
#[inline]
pub fn bilinear<T: Real, const D: usize>(m: &Matrix<T, D>, u: &Vector<T, D>, v: &Vector<T, D>) -> T {
    dot(u, &mat_vec(m, v))
}

#[inline]
pub fn quad<T: Real, const D: usize>(m: &Matrix<T, D>, v: &Vector<T, D>) -> T {
    bilinear(m, v, v)
}

#[inline]
pub fn outer<T: Real, const D: usize>(a: &Vector<T, D>, b: &Vector<T, D>) -> Matrix<T, D> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i] * b[j]))
}

#[inline]
pub fn mat_add<T: Real, const D: usize>(a: &Matrix<T, D>, b: &Matrix<T, D>) -> Matrix<T, D> {
    std::array::from_fn(|i| add(&a[i], &b[i]))
}

#[inline]
pub fn mat_sub<T: Real, const D: usize>(a: &Matrix<T, D>, b: &Matrix<T, D>) -> Matrix<T, D> {
    std::array::from_fn(|i| sub(&a[i], &b[i]))
}

#[inline]
pub fn mat_scale<T: Real, const D: usize>(a: &Matrix<T, D>, s: T) -> Matrix<T, D> {
    std::array::from_fn(|i| scale(&a[i], s))
}

pub fn transpose<T: Real, const D: usize>(a: &Matrix<T, D>) -> Matrix<T, D> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn max_asymmetry<T: Real, const D: usize>(a: &Matrix<T, D>) -> T {
    let mut m = T::zero();
    for i in 0..D {
        for j in 0..i {
            m = m.max((a[i][j] - a[j][i]).abs());
        }
    }
    m
}

pub fn max_abs_diff<T: Real, const D: usize>(a: &Matrix<T, D>, b: &Matrix<T, D>) -> T {
    let mut m = T::zero();
    for i in 0..D {
        for j in 0..D {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

/// Lower-triangular Cholesky factor, `None` when `a` is not positive definite.
pub fn cholesky<T: Real, const D: usize>(a: &Matrix<T, D>) -> Option<Matrix<T, D>> {
    let mut l = [[T::zero(); D]; D];
    for j in 0..D {
        let mut s = a[j][j];
        for k in 0..j {
            s = s - l[j][k] * l[j][k];
        }
        if !(s > T::zero()) {
            return None;
        }
        let d = s.sqrt();
        l[j][j] = d;
        for i in (j + 1)..D {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    Some(l)
}

pub fn is_spd<T: Real, const D: usize>(a: &Matrix<T, D>) -> bool {
    cholesky(a).is_some()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real, const D: usize>(a: &Matrix<T, D>, b: &Vector<T, D>) -> Option<Vector<T, D>> {
    let mut m: Vec<T> = a.iter().flat_map(|r| r.iter().copied()).collect();
    let mut rhs: Vec<T> = b.to_vec();
    dyn_solve_in_place(&mut m, &mut rhs, D)?;
    Some(std::array::from_fn(|i| rhs[i]))
}

pub fn inverse<T: Real, const D: usize>(a: &Matrix<T, D>) -> Option<Matrix<T, D>> {
    let mut cols = [[T::zero(); D]; D];
    for (j, col) in cols.iter_mut().enumerate() {
        *col = solve(a, &unit(j))?;
    }
    Some(transpose(&cols))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues<T: Real, const D: usize>(a: &Matrix<T, D>) -> [T; D] {
    let mut m = *a;
    let two = T::lit(2.0);
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..D {
            for j in 0..i {
                off = off + m[i][j] * m[i][j];
            }
        }
        if off <= T::machine_eps() * T::machine_eps() {
            break;
        }
        for p in 0..D {
            for q in (p + 1)..D {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (two * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..D {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..D {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: [T; D] = std::array::from_fn(|i| m[i][i]);
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// In-place Gaussian elimination on a row-major `n x n` matrix; the solution
/// overwrites `rhs`. Returns `None` on a (numerically) singular pivot.
pub fn dyn_solve_in_place<T: Real>(m: &mut [T], rhs: &mut [T], n: usize) -> Option<()> {
    debug_assert_eq!(m.len(), n * n);
    let mut scale_ref = T::zero();
    for v in m.iter() {
        scale_ref = scale_ref.max(v.abs());
    }
    let tiny = scale_ref * T::machine_eps() * T::lit(16.0);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if !(m[piv * n + col].abs() > tiny) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                m[r * n + k] = m[r * n + k] - f * m[col * n + k];
            }
            rhs[r] = rhs[r] - f * rhs[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for k in (r + 1)..n {
            s = s - m[r * n + k] * rhs[k];
        }
        rhs[r] = s / m[r * n + r];
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_detects_indefinite() {
        let a = [[2.0, 1.0], [1.0, 2.0]];
        assert!(is_spd(&a));
        let b = [[1.0, 2.0], [2.0, 1.0]];
        assert!(!is_spd(&b));
    }

    #[test]
    fn solve_and_inverse() {
        let a: [[f64; 3]; 3] = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x = solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let back = mat_vec(&a, &x);
        for i in 0..3 {
            assert!((back[i] - [1.0, 2.0, 3.0][i]).abs() < 1e-14);
        }
        let inv = inverse(&a).unwrap();
        let id = std::array::from_fn::<_, 3, _>(|i| mat_vec(&a, &transpose(&inv)[i]));
        // columns of inv mapped by a give unit vectors
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i][j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a: [[f64; 2]; 2] = [[2.0, 1.0], [1.0, 2.0]];
        let ev = sym_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let ev32 = sym_eigenvalues(&[[2.0f32, 1.0], [1.0, 2.0]]);
        assert!((ev32[0] - 1.0).abs() < 1e-5);
    }
}
