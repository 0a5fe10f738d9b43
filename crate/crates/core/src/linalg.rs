//! Dense linear algebra used throughout the crate: guarded solves,
//! eigendecompositions with left/right vectors, null vectors and the
//! matrix exponential.

use nalgebra::{Complex, DMatrix, DVector, Schur, SVD};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Condition numbers beyond this are treated as singular.
const MAX_CONDITION: f64 = 1e13;
/// Largest acceptable normwise backward error of a solve.
const SOLVE_BACKWARD_TOL: f64 = 1e-10;
/// Relative reconstruction residual above which a matrix is called defective.
const DEFECT_TOL: f64 = 1e-6;
/// Relative eigenvalue separation below which a spectrum is flagged clustered.
const CLUSTER_TOL: f64 = 1e-6;

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A X = B` by LU with one step of iterative refinement.
///
/// Fails with [`Error::Singular`] when the 1-norm condition estimate is
/// too large or the refined solution still has a backward error above
/// `1e-10`.
pub fn solve_linear(a: &DMatrix<f64>, b: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::arg(format!(
            "{context}: cannot solve {}x{} system with {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let singular = |condition: f64| Error::Singular {
        context: context.to_string(),
        condition,
    };
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
    let a_norm = norm1(a);
    let condition = a_norm * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(singular(condition));
    }
    let mut x = lu.solve(b).ok_or_else(|| singular(condition))?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let resid = b - a * &x;
    let scale = a_norm * norm1(&x) + norm1(b);
    let backward = if scale > 0.0 { norm1(&resid) / scale } else { 0.0 };
    if !backward.is_finite() || backward > SOLVE_BACKWARD_TOL {
        return Err(singular(condition));
    }
    Ok(x)
}

pub fn solve_vector(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let x = solve_linear(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()), context)?;
    Ok(x.column(0).into_owned())
}

pub fn inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    solve_linear(a, &DMatrix::identity(a.nrows(), a.ncols()), context)
}

/// Eigenvalues with biorthonormal right and left eigenvectors.
///
/// Eigenvalues are sorted by descending real part, then descending
/// imaginary part. For a real input matrix complex eigenvalues come in
/// exact conjugate pairs whose vectors are exact conjugates, and real
/// eigenvalues have real vectors. `left * right = I`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    /// Right eigenvectors as columns.
    pub right: DMatrix<C64>,
    /// Left eigenvectors as rows.
    pub left: DMatrix<C64>,
    /// Two eigenvalues are closer than `1e-6` times the spectral radius.
    pub clustered: bool,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn right_vector(&self, k: usize) -> DVector<C64> {
        self.right.column(k).into_owned()
    }

    pub fn left_vector(&self, k: usize) -> DVector<C64> {
        self.left.row(k).transpose()
    }

    /// Index of the eigenvalue closest to `z`.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if (v - z).norm() < (self.values[best] - z).norm() {
                best = k;
            }
        }
        best
    }
}

fn eigen_order(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

fn frobenius_c(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Full eigendecomposition of a real square matrix.
pub fn eig_full(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(Error::arg("eigendecomposition of a non-square matrix"));
    }
    let d = a.nrows();
    if d == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            right: DMatrix::zeros(0, 0),
            left: DMatrix::zeros(0, 0),
            clustered: false,
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    let a_norm = a.norm();
    let ac = a.map(|x| C64::new(x, 0.0));
    let schur = Schur::try_new(ac.clone(), f64::EPSILON, 1000 * d.max(10))
        .ok_or_else(|| Error::numerical("Schur iteration did not converge"))?;
    let (q, t) = schur.unpack();

    // Eigenvectors of the triangular factor by back-substitution.
    let small = f64::EPSILON * a_norm.max(f64::MIN_POSITIVE);
    let mut x = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let lambda = t[(k, k)];
        x[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = t[(i, k)];
            for j in i + 1..k {
                s += t[(i, j)] * x[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < small {
                denom = C64::new(small, 0.0);
            }
            x[(i, k)] = -s / denom;
        }
    }
    let mut v = q * x;
    let mut values: Vec<C64> = (0..d).map(|k| t[(k, k)]).collect();
    for k in 0..d {
        let nrm = v.column(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            v.column_mut(k).scale_mut(1.0 / nrm);
        }
    }

    // Restore the symmetries of a real spectrum.
    let rho = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let real_tol = 1e-9 * a_norm.max(rho).max(f64::MIN_POSITIVE);
    let mut paired = vec![false; d];
    for k in 0..d {
        if paired[k] {
            continue;
        }
        if values[k].im.abs() <= real_tol {
            values[k].im = 0.0;
            realify_column(&mut v, k);
            paired[k] = true;
            continue;
        }
        let target = values[k].conj();
        let partner = (0..d)
            .filter(|&j| j != k && !paired[j] && values[j].im.abs() > real_tol && values[j].im * values[k].im < 0.0)
            .min_by(|&i, &j| (values[i] - target).norm().total_cmp(&(values[j] - target).norm()));
        if let Some(j) = partner {
            let (upper, vec_src) = if values[k].im > 0.0 { (k, k) } else { (j, j) };
            let lower = if upper == k { j } else { k };
            let mean = (values[upper] + values[lower].conj()) * 0.5;
            values[upper] = mean;
            values[lower] = mean.conj();
            let col: DVector<C64> = v.column(vec_src).into_owned();
            v.set_column(lower, &col.map(|z| z.conj()));
            paired[k] = true;
            paired[j] = true;
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eigen_order(&values[i], &values[j]));
    let values: Vec<C64> = order.iter().map(|&i| values[i]).collect();
    let right = DMatrix::from_fn(d, d, |r, c| v[(r, order[c])]);

    let residual_of = |left: &DMatrix<C64>| {
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&values));
        frobenius_c(&(&right * lambda * left - &ac))
    };
    let mut left = right.clone().try_inverse().ok_or(Error::Defective {
        residual: f64::INFINITY,
    })?;
    for k in 0..d {
        if values[k].im < 0.0 {
            if let Some(j) = (0..d).find(|&j| values[j] == values[k].conj()) {
                let row = left.row(j).map(|z| z.conj());
                left.set_row(k, &row);
            }
        } else if values[k].im == 0.0 {
            left.row_mut(k).apply(|z| z.im = 0.0);
        }
    }
    let residual = residual_of(&left);
    if !residual.is_finite() || residual > DEFECT_TOL * a_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Defective { residual });
    }

    let mut clustered = false;
    for i in 0..d {
        for j in i + 1..d {
            if (values[i] - values[j]).norm() < CLUSTER_TOL * rho {
                clustered = true;
            }
        }
    }
    Ok(EigenDecomposition {
        values,
        right,
        left,
        clustered,
    })
}

/// Rotates column `k` so its largest entry is real and positive, then
/// drops the imaginary parts.
fn realify_column(v: &mut DMatrix<C64>, k: usize) {
    let col = v.column(k);
    let (imax, _) = col.iter().enumerate().fold(
        (0, 0.0),
        |(bi, bn), (i, z)| if z.norm() > bn { (i, z.norm()) } else { (bi, bn) },
    );
    let pivot = col[imax];
    if pivot.norm() == 0.0 {
        return;
    }
    let phase = pivot.conj() / pivot.norm();
    let mut realified: DVector<C64> = col.map(|z| C64::new((z * phase).re, 0.0));
    let nrm = realified.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    realified.scale_mut(1.0 / nrm);
    v.set_column(k, &realified);
}

/// Eigenvalues only, sorted like [`eig_full`]. Conjugate pairs are exact.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::arg("eigenvalues of a non-square matrix"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    let mut values: Vec<C64> = a.complex_eigenvalues().iter().copied().collect();
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for z in values.iter_mut() {
        if z.im.abs() <= 1e-12 * scale {
            z.im = 0.0;
        }
    }
    values.sort_by(eigen_order);
    Ok(values)
}

/// The unique (up to scale) vector `x` with `x A = 0`.
///
/// If the null vector has a single sign it is returned nonnegative and
/// summing to one; otherwise it has unit 2-norm with its largest entry
/// positive.
pub fn left_null_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    left_null_vector_scaled(a, 0.0)
}

/// Like [`left_null_vector`], but singular values are judged against
/// `max(scale, largest singular value)`. Callers pass the magnitude of the
/// terms that cancelled while forming `a`.
pub fn left_null_vector_scaled(a: &DMatrix<f64>, scale: f64) -> Result<DVector<f64>> {
    if !a.is_square() {
        return Err(Error::arg("left null vector of a non-square matrix"));
    }
    let d = a.nrows();
    if d == 0 {
        return Err(Error::NullSpaceDimension { dimension: 0 });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    let svd = SVD::try_new(a.transpose(), false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical("SVD did not converge"))?;
    let sigma = &svd.singular_values;
    let smax = sigma.max();
    let tol = (d as f64) * 1e-13 * smax.max(scale).max(f64::MIN_POSITIVE);
    let small: Vec<usize> = (0..d).filter(|&i| sigma[i] <= tol).collect();
    if small.len() != 1 {
        return Err(Error::NullSpaceDimension { dimension: small.len() });
    }
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut x: DVector<f64> = v_t.row(small[0]).transpose();
    let xmax = x.amax();
    let clamp = 1e-12 * xmax;
    let pos = x.iter().filter(|&&e| e > clamp).count();
    let neg = x.iter().filter(|&&e| e < -clamp).count();
    if pos == 0 || neg == 0 {
        if neg > 0 {
            x.neg_mut();
        }
        x.iter_mut().for_each(|e| *e = e.max(0.0));
        let s = x.sum();
        x /= s;
    } else {
        let imax = x.iamax();
        if x[imax] < 0.0 {
            x.neg_mut();
        }
        let nrm = x.norm();
        x /= nrm;
    }
    Ok(x)
}

/// `exp(A t)` for `t >= 0` by Padé scaling and squaring.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::arg("exponential of a non-square matrix"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::arg(format!(
            "exponential time must be finite and nonnegative, got {t}"
        )));
    }
    let e = (a * t).exp();
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("matrix exponential overflowed"));
    }
    Ok(e)
}
