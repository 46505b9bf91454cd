//! Conjugate gradients and a minimal CSR matrix, shared by the Poisson,
//! Bogovskii and Picard solves.

pub struct CgOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Preconditioned CG on an SPD operator given as a closure `apply(x, y)`
/// writing `y = A x`. `diag` is an optional Jacobi preconditioner. The
/// optional `project` hook is applied to residual and iterate each step
/// (mean-zero projection for singular Neumann systems).
pub fn cg<A, P>(
    apply: A,
    b: &[f64],
    x: &mut [f64],
    tol_rel: f64,
    max_iter: usize,
    diag: Option<&[f64]>,
    mut project: P,
) -> CgOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    let n = b.len();
    let nb = norm2(b).max(1e-300);
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];

    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    project(&mut r);

    let precond = |z: &mut [f64], r: &[f64]| match diag {
        Some(d) => {
            for i in 0..z.len() {
                z[i] = r[i] / d[i];
            }
        }
        None => z.copy_from_slice(r),
    };

    let mut z = vec![0.0; n];
    precond(&mut z, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    let mut it = 0;
    let mut res = norm2(&r) / nb;
    while res > tol_rel && it < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        precond(&mut z, &r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
        it += 1;
        res = norm2(&r) / nb;
    }
    CgOutcome {
        iterations: it,
        rel_residual: res,
        converged: res <= tol_rel,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn subtract_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// Compressed sparse rows; rows sorted, duplicate entries combined.
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut trip: Vec<(usize, usize, f64)>,
    ) -> Csr {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut s = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            y[r] = s;
        }
    }

    /// y += A^T x (scatter form).
    pub fn matvec_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.data[k] * xr;
            }
        }
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.data[lo..hi])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::stream_rng;
    use rand::Rng;

    #[test]
    fn cg_solves_small_spd_system() {
        // A = tridiag(-1, 2, -1), n = 50
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = 2.0 * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                y[i] = s;
            }
        };
        let mut rng = stream_rng(1, 0);
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut x = vec![0.0; n];
        let out = cg(apply, &b, &mut x, 1e-12, 10_000, None, |_| {});
        assert!(out.converged, "res {}", out.rel_residual);
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn csr_transpose_consistency() {
        let a = Csr::from_triplets(
            3,
            4,
            vec![(0, 1, 2.0), (0, 1, 1.0), (1, 0, -1.0), (2, 3, 4.0)],
        );
        let x = [1.0, 2.0, 3.0, 4.0];
        let mut y = [0.0; 3];
        a.matvec(&x, &mut y);
        assert_eq!(y, [6.0, -1.0, 16.0]);
        let z = [1.0, 1.0, 1.0];
        let mut w = [0.0; 4];
        a.matvec_transpose_add(&z, &mut w);
        assert_eq!(w, [-1.0, 3.0, 0.0, 4.0]);
    }
}
