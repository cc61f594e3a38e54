//! Dense kernels: symmetric eigendecomposition, thin SVD and the reduced
//! generalized eigenproblem.
//!
//! On native targets with the `lapack` feature (default) the heavy kernels
//! call the system LAPACK (OpenBLAS) directly on nalgebra's column-major
//! storage. The pure-Rust nalgebra path is kept as the wasm implementation
//! and as a cross-check oracle in tests.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[cfg(all(feature = "lapack", not(target_arch = "wasm32")))]
mod lapack {
    use std::ffi::c_char;
    use std::sync::Once;

    #[link(name = "openblas")]
    extern "C" {
        fn dsyevd_(
            jobz: *const c_char,
            uplo: *const c_char,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            w: *mut f64,
            work: *mut f64,
            lwork: *const i32,
            iwork: *mut i32,
            liwork: *const i32,
            info: *mut i32,
        );
        fn dgesdd_(
            jobz: *const c_char,
            m: *const i32,
            n: *const i32,
            a: *mut f64,
            lda: *const i32,
            s: *mut f64,
            u: *mut f64,
            ldu: *const i32,
            vt: *mut f64,
            ldvt: *const i32,
            work: *mut f64,
            lwork: *const i32,
            iwork: *mut i32,
            info: *mut i32,
        );
        fn openblas_set_num_threads(n: i32);
    }

    static INIT: Once = Once::new();

    /// BLAS threading off: outer loops already parallelize over grid points,
    /// and single-threaded kernels keep results bitwise reproducible.
    fn init() {
        INIT.call_once(|| unsafe { openblas_set_num_threads(1) });
    }

    /// Eigenvalues ascending; `a` is overwritten with the eigenvectors.
    pub fn dsyevd(a: &mut [f64], n: usize) -> Result<Vec<f64>, i32> {
        init();
        assert_eq!(a.len(), n * n);
        let mut w = vec![0.0f64; n];
        let jobz = b'V' as c_char;
        let uplo = b'L' as c_char;
        let n_i = n as i32;
        let mut info = 0i32;
        // Workspace query.
        let mut work_q = [0.0f64];
        let mut iwork_q = [0i32];
        let neg = -1i32;
        unsafe {
            dsyevd_(
                &jobz,
                &uplo,
                &n_i,
                a.as_mut_ptr(),
                &n_i,
                w.as_mut_ptr(),
                work_q.as_mut_ptr(),
                &neg,
                iwork_q.as_mut_ptr(),
                &neg,
                &mut info,
            );
        }
        if info != 0 {
            return Err(info);
        }
        let lwork = work_q[0] as i32;
        let liwork = iwork_q[0];
        let mut work = vec![0.0f64; lwork as usize];
        let mut iwork = vec![0i32; liwork as usize];
        unsafe {
            dsyevd_(
                &jobz,
                &uplo,
                &n_i,
                a.as_mut_ptr(),
                &n_i,
                w.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(info);
        }
        Ok(w)
    }

    /// Thin SVD of an m-by-n matrix (jobz = 'S'); returns (u, sigma).
    pub fn dgesdd_thin(a: &mut [f64], m: usize, n: usize) -> Result<(Vec<f64>, Vec<f64>), i32> {
        init();
        assert_eq!(a.len(), m * n);
        let k = m.min(n);
        let mut s = vec![0.0f64; k];
        let mut u = vec![0.0f64; m * k];
        let mut vt = vec![0.0f64; k * n];
        let jobz = b'S' as c_char;
        let (m_i, n_i, k_i) = (m as i32, n as i32, k as i32);
        let mut iwork = vec![0i32; 8 * k];
        let mut info = 0i32;
        let mut work_q = [0.0f64];
        let neg = -1i32;
        unsafe {
            dgesdd_(
                &jobz,
                &m_i,
                &n_i,
                a.as_mut_ptr(),
                &m_i,
                s.as_mut_ptr(),
                u.as_mut_ptr(),
                &m_i,
                vt.as_mut_ptr(),
                &k_i,
                work_q.as_mut_ptr(),
                &neg,
                iwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            return Err(info);
        }
        let lwork = work_q[0] as i32;
        let mut work = vec![0.0f64; lwork as usize];
        unsafe {
            dgesdd_(
                &jobz,
                &m_i,
                &n_i,
                a.as_mut_ptr(),
                &m_i,
                s.as_mut_ptr(),
                u.as_mut_ptr(),
                &m_i,
                vt.as_mut_ptr(),
                &k_i,
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            return Err(info);
        }
        Ok((u, s))
    }
}

/// Full symmetric eigendecomposition; eigenvalues ascending, eigenvectors as
/// orthonormal columns.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    assert_eq!(a.nrows(), a.ncols(), "sym_eig expects a square matrix");
    #[cfg(all(feature = "lapack", not(target_arch = "wasm32")))]
    {
        let n = a.nrows();
        let mut buf = a.as_slice().to_vec();
        let vals = lapack::dsyevd(&mut buf, n).map_err(|info| Error::Conditioning {
            context: "dsyevd",
            detail: format!("LAPACK info = {info}"),
        })?;
        let vecs = DMatrix::from_column_slice(n, n, &buf);
        Ok((vals, vecs))
    }
    #[cfg(not(all(feature = "lapack", not(target_arch = "wasm32"))))]
    {
        sym_eig_nalgebra(a)
    }
}

/// Pure-Rust eigendecomposition; the wasm path and the test oracle.
pub fn sym_eig_nalgebra(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let se = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.column_mut(k).copy_from(&se.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// Thin SVD returning the left singular vectors and singular values in
/// descending order. The right factor is never needed here.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    #[cfg(all(feature = "lapack", not(target_arch = "wasm32")))]
    {
        let (m, n) = a.shape();
        let mut buf = a.as_slice().to_vec();
        let (u, s) = lapack::dgesdd_thin(&mut buf, m, n).map_err(|info| Error::Conditioning {
            context: "dgesdd",
            detail: format!("LAPACK info = {info}"),
        })?;
        Ok((DMatrix::from_column_slice(m, m.min(n), &u), s))
    }
    #[cfg(not(all(feature = "lapack", not(target_arch = "wasm32"))))]
    {
        thin_svd_nalgebra(a)
    }
}

pub fn thin_svd_nalgebra(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.ok_or(Error::Conditioning {
        context: "svd",
        detail: "left singular vectors not computed".into(),
    })?;
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    for (pos, &i) in order.iter().enumerate() {
        u_sorted.column_mut(pos).copy_from(&u.column(i));
    }
    Ok((u_sorted, s))
}

/// Solution of the generalized symmetric-definite problem
/// `h x = lambda b x` via Cholesky reduction. Returns eigenvalues ascending
/// and b-orthonormal eigenvector columns.
pub fn generalized_sym_eig(
    h: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    if b.nrows() != n || b.ncols() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "generalized eigenproblem",
            expected: n,
            found: b.nrows(),
        });
    }
    let chol = b.clone().cholesky().ok_or(Error::Conditioning {
        context: "reduced Gram matrix",
        detail: "Cholesky factorization failed (matrix not positive definite)".into(),
    })?;
    let l = chol.l();
    // A = L^-1 h L^-T, symmetrized against round-off.
    let y = l
        .solve_lower_triangular(h)
        .ok_or_else(|| singular("forward substitution"))?;
    let a = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| singular("backward substitution"))?
        .transpose();
    let a_sym = 0.5 * (&a + a.transpose());
    let (vals, y_vecs) = sym_eig(&a_sym)?;
    // x = L^-T y, so that x^T b x = I.
    let x = l
        .transpose()
        .solve_upper_triangular(&y_vecs)
        .ok_or_else(|| singular("triangular back-solve"))?;
    Ok((vals, x))
}

fn singular(context: &'static str) -> Error {
    Error::Conditioning {
        context: "generalized eigenproblem",
        detail: format!("{context} hit a zero pivot"),
    }
}

/// Frobenius distance between the orthogonal projectors of two orthonormal
/// blocks, computed in the cancellation-free residual form
/// `||P_A - P_B||_F^2 = ||(I - P_B) A||_F^2 + ||(I - P_A) B||_F^2`,
/// which stays accurate for nearly identical subspaces (the Gram-trace
/// shortcut bottoms out at sqrt(eps)).
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ab = b.transpose() * a;
    let ra = a - b * &ab;
    let rb = b - a * ab.transpose();
    (ra.norm_squared() + rb.norm_squared()).sqrt()
}

/// In-place projection `block -= basis (basis^T block)`, assuming `basis`
/// has orthonormal columns. One call removes the component to first order;
/// callers needing full orthogonality run two passes.
pub fn project_out(basis: &DMatrix<f64>, block: &mut DMatrix<f64>) {
    if basis.ncols() == 0 {
        return;
    }
    let coeff = basis.transpose() * &*block;
    *block -= basis * coeff;
}

/// Orthonormalize the columns of `block` by thin SVD, dropping directions
/// with singular value at or below `tol_abs`. Returns an orthonormal block
/// with the surviving rank (possibly zero columns).
pub fn orthonormalize_trim(block: &DMatrix<f64>, tol_abs: f64) -> Result<DMatrix<f64>> {
    if block.ncols() == 0 {
        return Ok(block.clone());
    }
    let (u, s) = thin_svd(block)?;
    let keep = s.iter().take_while(|&&sv| sv > tol_abs).count();
    Ok(u.columns(0, keep).into_owned())
}
