//! Constructive devices in discrete form: Hardy-Littlewood maximal function,
//! Lipschitz truncation with dyadic level blocks, a discrete Bogovskii
//! operator (right inverse of the divergence), and empirical Korn /
//! Gagliardo-Nirenberg constants.

use crate::error::{Error, Result};
use crate::exponent::{luxembourg_norm, luxembourg_norm_on, modular, VariableExponent, Weight};
use crate::grid::{
    discrete_divergence, discrete_gradient, sym_skew_split, Centering, Field, Grid, Rank, Rect,
};
use crate::linalg::{cg, norm2};
use crate::util::stream_rng;
use rand::Rng;
use rayon::prelude::*;

/// Default Lipschitz-extension constant multiplier; discrete maximal-function
/// geometry differs from the continuum constants, so this is a knob validated
/// by the corpus tests.
pub const C_LIP_DEFAULT: f64 = 4.0;

/// Divergence residual the Bogovskii solve must reach (max norm).
pub const BOGOVSKII_TOL: f64 = 1e-9;

/// Discrete maximal function: max over dyadic radii r in {h, 2h, 4h, ...}
/// (up to the domain diameter) of the mean of g over the open ball
/// B(x, r) intersected with the grid. Site counting is exact; the radius-h
/// ball is the site itself, so M g >= g pointwise.
pub fn maximal_function(g: &Field) -> Result<Field> {
    if g.rank() != Rank::Scalar {
        return Err(Error::RankMismatch {
            expected: "scalar",
            got: g.rank().name(),
        });
    }
    if g.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "maximal function needs nonnegative input".into(),
        ));
    }
    let h = g.grid().h();
    let diam = g.grid().diameter();
    let mut levels = 0usize;
    while h * (1u64 << levels) as f64 <= diam {
        levels += 1;
    }
    let nk = levels + 1; // radii h * 2^k, k = 0..=levels
    let n = g.site_count();
    let nsx = g.sites_x();
    let pos: Vec<(f64, f64)> = (0..n).map(|s| g.site_pos(s % nsx, s / nsx)).collect();
    let vals = g.data().to_vec();

    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = pos[i];
            let mut sums = vec![0.0f64; nk];
            let mut counts = vec![0usize; nk];
            for j in 0..n {
                let (xj, yj) = pos[j];
                let d = (xi - xj).hypot(yi - yj);
                // smallest k with d < h 2^k
                let mut k = 0usize;
                while h * (1u64 << k) as f64 <= d {
                    k += 1;
                }
                if k < nk {
                    sums[k] += vals[j];
                    counts[k] += 1;
                }
            }
            let mut best = 0.0f64;
            let mut acc_sum = 0.0;
            let mut acc_cnt = 0usize;
            for k in 0..nk {
                acc_sum += sums[k];
                acc_cnt += counts[k];
                if acc_cnt > 0 {
                    best = best.max(acc_sum / acc_cnt as f64);
                }
            }
            best
        })
        .collect();

    let mut f = Field::zeros(*g.grid(), Rank::Scalar, g.centering());
    f.data_mut().copy_from_slice(&out);
    Ok(f)
}

#[derive(Clone, Debug)]
pub struct TruncationResult {
    pub truncated: Field,
    pub level: f64,
    /// sites where M(|grad u|) > level
    pub bad_set: Vec<bool>,
    /// sites where the truncation differs from the input
    pub changed_set: Vec<bool>,
    pub c_lip_input: f64,
    /// measured max |grad u_lambda| / lambda
    pub effective_c: f64,
}

impl TruncationResult {
    /// Re-check the contract against the original field.
    pub fn validate(&self, original: &Field) -> Result<()> {
        let g = self.truncated.grid();
        let nsx = self.truncated.sites_x();
        // changed set inside bad set + one-cell dilation
        for (s, &ch) in self.changed_set.iter().enumerate() {
            if !ch {
                continue;
            }
            let ix = (s % nsx) as i64;
            let iy = (s / nsx) as i64;
            let mut near_bad = false;
            'outer: for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let jx = ix + dx;
                    let jy = iy + dy;
                    if jx < 0 || jy < 0 || jx >= nsx as i64 || jy >= self.truncated.sites_y() as i64
                    {
                        continue;
                    }
                    if self.bad_set[jy as usize * nsx + jx as usize] {
                        near_bad = true;
                        break 'outer;
                    }
                }
            }
            if !near_bad {
                return Err(Error::InvalidInput(format!(
                    "changed site {s} not in the dilated bad set"
                )));
            }
        }
        // gradient bound with the reported constant
        let grad_max = discrete_gradient(&self.truncated)?.magnitude().max_abs();
        if grad_max > self.effective_c * self.level * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidInput(format!(
                "gradient bound violated: {grad_max} > c lambda = {}",
                self.effective_c * self.level
            )));
        }
        // sup-norm control
        if self.truncated.max_abs() > original.max_abs() * (1.0 + 1e-15) {
            return Err(Error::InvalidInput("sup norm grew under truncation".into()));
        }
        // boundary values preserved (zero)
        if self.truncated.boundary_max_abs() != 0.0 {
            return Err(Error::TestSpace {
                max_boundary: self.truncated.boundary_max_abs(),
            });
        }
        let _ = g;
        Ok(())
    }

    /// CSV per site: `x,y,u,u_lambda,bad,changed` (scalar fields).
    pub fn write_csv<W: std::io::Write>(&self, original: &Field, w: &mut W) -> Result<()> {
        writeln!(w, "x,y,u,u_lambda,bad,changed")?;
        let f = &self.truncated;
        for iy in 0..f.sites_y() {
            for ix in 0..f.sites_x() {
                let s = f.site_index(ix, iy);
                let (x, y) = f.site_pos(ix, iy);
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    crate::grid::fmt17(x),
                    crate::grid::fmt17(y),
                    crate::grid::fmt17(original.get(s, 0)),
                    crate::grid::fmt17(f.get(s, 0)),
                    self.bad_set[s] as u8,
                    self.changed_set[s] as u8
                )?;
            }
        }
        Ok(())
    }
}

/// Lipschitz truncation at level `lambda`: the bad set is
/// {M(|grad u|) > lambda}; on it the field is replaced by the clamped
/// McShane extension min over good sites y of u(y) + c_lip lambda |x - y|.
/// Good sites (including the whole boundary) keep their values.
pub fn lipschitz_truncate(u: &Field, lambda: f64, c_lip: f64) -> Result<TruncationResult> {
    if u.centering() != Centering::Node || u.rank() == Rank::Tensor2x2 {
        return Err(Error::InvalidInput(
            "truncation expects a node-centered scalar or vector field".into(),
        ));
    }
    let grad_mag = discrete_gradient(u)?.magnitude();
    let maximal = maximal_function(&grad_mag)?;
    lipschitz_truncate_given_maximal(u, &maximal, lambda, c_lip)
}

/// Truncation with a precomputed maximal function of |grad u|; level sweeps
/// reuse one maximal-function pass.
pub fn lipschitz_truncate_given_maximal(
    u: &Field,
    maximal: &Field,
    lambda: f64,
    c_lip: f64,
) -> Result<TruncationResult> {
    if lambda <= 0.0 {
        return Err(Error::Parameter(format!(
            "truncation level must be positive, got {lambda}"
        )));
    }
    if u.boundary_max_abs() != 0.0 {
        return Err(Error::TestSpace {
            max_boundary: u.boundary_max_abs(),
        });
    }
    let g = u.grid();
    let nsx = u.sites_x();
    let n = u.site_count();
    let nc = u.components();

    let mut bad = vec![false; n];
    for s in 0..n {
        let (ix, iy) = (s % nsx, s / nsx);
        bad[s] = maximal.get(s, 0) > lambda && !g.is_boundary_node(ix, iy);
    }
    let good_sites: Vec<usize> = (0..n).filter(|&s| !bad[s]).collect();
    let pos: Vec<(f64, f64)> = (0..n).map(|s| u.site_pos(s % nsx, s / nsx)).collect();
    let clamp_bound = u.max_abs();
    let slope = c_lip * lambda;

    let bad_sites: Vec<usize> = (0..n).filter(|&s| bad[s]).collect();
    let replacements: Vec<(usize, Vec<f64>)> = bad_sites
        .par_iter()
        .map(|&s| {
            let (x, y) = pos[s];
            let mut vals = vec![0.0; nc];
            for c in 0..nc {
                let mut m = f64::INFINITY;
                for &gsite in &good_sites {
                    let (gx, gy) = pos[gsite];
                    let cand = u.get(gsite, c) + slope * (x - gx).hypot(y - gy);
                    if cand < m {
                        m = cand;
                    }
                }
                vals[c] = m.clamp(-clamp_bound, clamp_bound);
            }
            (s, vals)
        })
        .collect();

    let mut truncated = u.clone();
    let mut changed = vec![false; n];
    for (s, vals) in replacements {
        for c in 0..nc {
            if vals[c] != u.get(s, c) {
                changed[s] = true;
            }
            truncated.set(s, c, vals[c]);
        }
    }
    let effective_c = if lambda > 0.0 {
        discrete_gradient(&truncated)?.magnitude().max_abs() / lambda
    } else {
        0.0
    };
    Ok(TruncationResult {
        truncated,
        level: lambda,
        bad_set: bad,
        changed_set: changed,
        c_lip_input: c_lip,
        effective_c,
    })
}

/// Search the dyadic candidates 2^(2^j) * 2^k inside the level block
/// [2^(2^j), 2^(2^(j+1))] and return the level minimizing the variable
/// exponent norm of lambda * indicator(changed set), together with that norm.
pub fn select_levels(u: &Field, j: u32, p: &VariableExponent) -> Result<(f64, f64)> {
    if j < 1 {
        return Err(Error::Parameter("level block index must be >= 1".into()));
    }
    if 1u64.checked_shl(j + 1).is_none() || (1u64 << (j + 1)) > 1000 {
        return Err(Error::LevelOverflow { j });
    }
    let lo_exp = 1u64 << j;
    let hi_exp = 1u64 << (j + 1);
    let unit = Weight::unit(*u.grid(), Centering::Node);
    let grad_mag = discrete_gradient(u)?.magnitude();
    let maximal = maximal_function(&grad_mag)?;
    let mut best: Option<(f64, f64)> = None;
    for e in lo_exp..=hi_exp {
        let lambda = 2.0f64.powi(e as i32);
        if !lambda.is_finite() {
            return Err(Error::LevelOverflow { j });
        }
        let result = lipschitz_truncate_given_maximal(u, &maximal, lambda, C_LIP_DEFAULT)?;
        let mut chi = Field::zeros(*u.grid(), Rank::Scalar, Centering::Node);
        for (s, &ch) in result.changed_set.iter().enumerate() {
            if ch {
                chi.set(s, 0, lambda);
            }
        }
        let quality = luxembourg_norm(&chi, p, &unit)?;
        match best {
            Some((_, q)) if quality >= q => {}
            _ => best = Some((lambda, quality)),
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[derive(Clone, Debug)]
pub struct BogovskiiResult {
    /// vector field on the nodes of the subdomain grid, zero on its boundary
    pub w: Field,
    pub div_residual: f64,
    pub outer_iterations: usize,
}

/// Right inverse of the discrete divergence on a subdomain grid: solves the
/// least-gradient problem min 1/2 sum |grad w|^2 subject to div w = f at
/// interior nodes, w = 0 on the boundary, via conjugate gradients on the
/// Stokes-like Schur complement.
pub fn bogovskii(f: &Field) -> Result<BogovskiiResult> {
    if f.rank() != Rank::Scalar || f.centering() != Centering::Node {
        return Err(Error::InvalidInput(
            "bogovskii expects a node-centered scalar field".into(),
        ));
    }
    f.validate_finite()?;
    let g = *f.grid();
    let h = g.h();
    let h2 = h * h;
    let mean: f64 = f.data().iter().sum::<f64>() * h2;
    let l1: f64 = f.data().iter().map(|v| v.abs()).sum::<f64>() * h2;
    if l1 > 0.0 && mean.abs() > 1e-10 * l1 {
        return Err(Error::IncompatibleFlux {
            integral: mean,
            tol: 1e-10 * l1,
        });
    }

    let nx = g.nx();
    let ny = g.ny();
    let ni_x = nx - 1;
    let ni_y = ny - 1;
    let ni = ni_x * ni_y;
    let idx = |ix: usize, iy: usize| iy * ni_x + ix; // interior indexing

    // per-component Dirichlet five-point laplacian on interior nodes
    let lap = |u: &[f64], out: &mut [f64]| {
        for iy in 0..ni_y {
            for ix in 0..ni_x {
                let i = idx(ix, iy);
                let mut s = 4.0 * u[i];
                if ix > 0 {
                    s -= u[idx(ix - 1, iy)];
                }
                if ix + 1 < ni_x {
                    s -= u[idx(ix + 1, iy)];
                }
                if iy > 0 {
                    s -= u[idx(ix, iy - 1)];
                }
                if iy + 1 < ni_y {
                    s -= u[idx(ix, iy + 1)];
                }
                out[i] = s / h2;
            }
        }
    };

    // central-difference divergence at interior nodes, boundary values zero
    let div_interior = |w1: &[f64], w2: &[f64], out: &mut [f64]| {
        for iy in 0..ni_y {
            for ix in 0..ni_x {
                let i = idx(ix, iy);
                let xr = if ix + 1 < ni_x { w1[idx(ix + 1, iy)] } else { 0.0 };
                let xl = if ix > 0 { w1[idx(ix - 1, iy)] } else { 0.0 };
                let yr = if iy + 1 < ni_y { w2[idx(ix, iy + 1)] } else { 0.0 };
                let yl = if iy > 0 { w2[idx(ix, iy - 1)] } else { 0.0 };
                out[i] = (xr - xl) / (2.0 * h) + (yr - yl) / (2.0 * h);
            }
        }
    };

    // adjoint of div_interior
    let div_adjoint = |q: &[f64], g1: &mut [f64], g2: &mut [f64]| {
        for iy in 0..ni_y {
            for ix in 0..ni_x {
                let i = idx(ix, iy);
                let xr = if ix + 1 < ni_x { q[idx(ix + 1, iy)] } else { 0.0 };
                let xl = if ix > 0 { q[idx(ix - 1, iy)] } else { 0.0 };
                let yr = if iy + 1 < ni_y { q[idx(ix, iy + 1)] } else { 0.0 };
                let yl = if iy > 0 { q[idx(ix, iy - 1)] } else { 0.0 };
                g1[i] = (xl - xr) / (2.0 * h);
                g2[i] = (yl - yr) / (2.0 * h);
            }
        }
    };

    let inner_max = 80 * (nx + ny) + 2000;
    let a_inv = |rhs1: &[f64], rhs2: &[f64], x1: &mut [f64], x2: &mut [f64]| -> Result<()> {
        for (rhs, x) in [(rhs1, &mut *x1), (rhs2, &mut *x2)] {
            let out = cg(lap, rhs, x, 1e-13, inner_max, None, |_| {});
            if !out.converged && out.rel_residual > 1e-10 {
                return Err(Error::IterationLimit {
                    what: "bogovskii inner poisson solve",
                    limit: inner_max,
                    residual: out.rel_residual,
                });
            }
        }
        Ok(())
    };

    // rhs: interior values of f
    let mut f_int = vec![0.0; ni];
    for iy in 0..ni_y {
        for ix in 0..ni_x {
            f_int[idx(ix, iy)] = f.at(ix + 1, iy + 1, 0);
        }
    }

    // Schur operator S q = div A^{-1} div^T q; outer CG solves S q = -f
    let mut g1 = vec![0.0; ni];
    let mut g2 = vec![0.0; ni];
    let mut x1 = vec![0.0; ni];
    let mut x2 = vec![0.0; ni];

    let mut q = vec![0.0; ni];
    let mut r: Vec<f64> = f_int.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut sp = vec![0.0; ni];
    let mut rs = norm2(&r);
    let nb = rs.max(1e-300);
    let outer_max = 40 * (nx + ny) + 400;
    let mut outer_it = 0;
    let mut rs2 = rs * rs;
    while rs / nb > 1e-11 && outer_it < outer_max {
        div_adjoint(&p, &mut g1, &mut g2);
        x1.iter_mut().for_each(|v| *v = 0.0);
        x2.iter_mut().for_each(|v| *v = 0.0);
        a_inv(&g1, &g2, &mut x1, &mut x2)?;
        div_interior(&x1, &x2, &mut sp);
        let psp: f64 = p.iter().zip(&sp).map(|(a, b)| a * b).sum();
        if psp <= 0.0 || !psp.is_finite() {
            break;
        }
        let alpha = rs2 / psp;
        for i in 0..ni {
            q[i] += alpha * p[i];
            r[i] -= alpha * sp[i];
        }
        let rs2_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs2_new / rs2;
        for i in 0..ni {
            p[i] = r[i] + beta * p[i];
        }
        rs2 = rs2_new;
        rs = rs2.sqrt();
        outer_it += 1;
    }

    // w = -A^{-1} div^T q
    div_adjoint(&q, &mut g1, &mut g2);
    x1.iter_mut().for_each(|v| *v = 0.0);
    x2.iter_mut().for_each(|v| *v = 0.0);
    a_inv(&g1, &g2, &mut x1, &mut x2)?;

    let mut w = Field::zeros(g, Rank::Vector2, Centering::Node);
    for iy in 0..ni_y {
        for ix in 0..ni_x {
            let i = idx(ix, iy);
            w.set_at(ix + 1, iy + 1, 0, -x1[i]);
            w.set_at(ix + 1, iy + 1, 1, -x2[i]);
        }
    }

    // measure the residual with the module divergence operator
    let div_w = discrete_divergence(&w)?;
    let mut resid = 0.0f64;
    for iy in 1..ny {
        for ix in 1..nx {
            resid = resid.max((div_w.at(ix, iy, 0) - f.at(ix, iy, 0)).abs());
        }
    }
    if l1 > 0.0 && resid > BOGOVSKII_TOL {
        return Err(Error::IterationLimit {
            what: "bogovskii saddle solve",
            limit: outer_max,
            residual: resid,
        });
    }
    Ok(BogovskiiResult {
        w,
        div_residual: resid,
        outer_iterations: outer_it,
    })
}

#[derive(Clone, Copy, Debug)]
pub enum InequalityKind {
    Korn { p: f64 },
    GagliardoNirenberg { q: f64, r: f64, s: f64, theta: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct InequalityReport {
    pub constant: f64,
    pub maximizer_seed: u64,
    pub samples: usize,
}

fn lp_norm(u: &Field, p: f64) -> Result<f64> {
    let pc = VariableExponent::constant(*u.grid(), Centering::Node, p)?;
    let unit = Weight::unit(*u.grid(), Centering::Node);
    Ok(modular(u, &pc, &unit)?.powf(1.0 / p))
}

/// Random smooth field: a short random Fourier sum, optionally vanishing on
/// the boundary.
pub fn random_smooth(
    grid: Grid,
    rank: Rank,
    seed: u64,
    stream: u64,
    zero_boundary: bool,
) -> Field {
    let mut rng = stream_rng(seed, stream);
    let (x0, x1) = grid.x_range();
    let (y0, y1) = grid.y_range();
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random::<f64>() * 2.0 - 1.0,
                (rng.random::<f64>() * 3.0).floor() + 1.0,
                (rng.random::<f64>() * 3.0).floor() + 1.0,
                rng.random::<f64>() * 2.0 * std::f64::consts::PI,
            )
        })
        .collect();
    let comps = rank.components();
    let shift: Vec<f64> = (0..comps).map(|_| rng.random::<f64>() * 1.5).collect();
    let mut f = Field::from_fn(grid, rank, Centering::Node, |x, y, c| {
        let xs = (x - x0) / (x1 - x0);
        let ys = (y - y0) / (y1 - y0);
        let mut v = 0.0;
        for &(a, kx, ky, phase) in &modes {
            if zero_boundary {
                v += a
                    * (std::f64::consts::PI * kx * xs).sin()
                    * (std::f64::consts::PI * ky * ys).sin()
                    * (phase + c as f64).cos();
            } else {
                v += a
                    * (std::f64::consts::PI * kx * xs + phase + shift[c]).cos()
                    * (std::f64::consts::PI * ky * ys + 0.5 * phase).cos();
            }
        }
        v
    });
    if zero_boundary {
        f.zero_boundary();
    }
    f
}

/// Empirical constant of a named inequality: the max over random smooth
/// fields of the defining quotient, with the maximizing stream recorded.
pub fn inequality_constant(
    kind: InequalityKind,
    grid: Grid,
    samples: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if samples < 1 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    match kind {
        InequalityKind::Korn { p } => {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::Parameter(format!(
                    "korn constant needs p in (1, inf), got {p}"
                )));
            }
        }
        InequalityKind::GagliardoNirenberg { q, r, s, theta } => {
            let d = 2.0;
            if !(0.0..=1.0).contains(&theta) {
                return Err(Error::Parameter("theta must lie in [0, 1]".into()));
            }
            if r == d && theta == 1.0 {
                return Err(Error::Parameter(
                    "theta must be below 1 when r = d".into(),
                ));
            }
            let want = theta * (1.0 / r - 1.0 / d) + (1.0 - theta) / s;
            if (1.0 / q - want).abs() > 1e-12 {
                return Err(Error::Parameter(format!(
                    "exponent relation violated: 1/q = {}, required {want}",
                    1.0 / q
                )));
            }
        }
    }
    let mut best = 0.0f64;
    let mut best_seed = 0u64;
    for k in 0..samples as u64 {
        let quotient = match kind {
            InequalityKind::Korn { p } => {
                let u = random_smooth(grid, Rank::Vector2, seed, k, false);
                let grad = discrete_gradient(&u)?;
                let (du, _) = sym_skew_split(&grad)?;
                let denom = lp_norm(&du, p)? + lp_norm(&u, p)?;
                if denom == 0.0 {
                    0.0
                } else {
                    lp_norm(&grad, p)? / denom
                }
            }
            InequalityKind::GagliardoNirenberg { q, r, s, theta } => {
                let u = random_smooth(grid, Rank::Scalar, seed, k, false);
                let grad = discrete_gradient(&u)?;
                let n1r = lp_norm(&u, r)? + lp_norm(&grad, r)?;
                let ns = lp_norm(&u, s)?;
                let denom = n1r.powf(theta) * ns.powf(1.0 - theta);
                if denom == 0.0 {
                    0.0
                } else {
                    lp_norm(&u, q)? / denom
                }
            }
        };
        if quotient > best {
            best = quotient;
            best_seed = k;
        }
    }
    Ok(InequalityReport {
        constant: best,
        maximizer_seed: best_seed,
        samples,
    })
}

/// Empirical local embedding constant: max over random smooth vector fields
/// of ||u||_{p(.)}(inner) / (||u||_{p^-} + ||Du||_{p(.)}).
pub fn embedding_constant(
    p: &VariableExponent,
    inner: Rect,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let grid = *p.values().grid();
    if !inner.strictly_inside(&grid) {
        return Err(Error::Parameter(
            "inner rectangle must be strictly inside the domain".into(),
        ));
    }
    let unit = Weight::unit(grid, Centering::Node);
    let mut best = 0.0f64;
    for k in 0..samples as u64 {
        let u = random_smooth(grid, Rank::Vector2, seed, k, false);
        let num = luxembourg_norm_on(&u, p, &unit, Some(&inner))?;
        let grad = discrete_gradient(&u)?;
        let (du, _) = sym_skew_split(&grad)?;
        let denom = lp_norm(&u, p.p_minus().max(1.0))? + luxembourg_norm(&du, p, &unit)?;
        if denom > 0.0 {
            best = best.max(num / denom);
        }
    }
    Ok(best)
}

/// Weak-type quotient lambda^(p-) |{M(|grad u|) > lambda}| / modular(grad u),
/// the quantity whose uniform boundedness underlies the level selection.
pub fn weak_type_quotient(u: &Field, lambda: f64, p_minus: f64) -> Result<f64> {
    let grad = discrete_gradient(u)?.magnitude();
    let m = maximal_function(&grad)?;
    let h2 = u.grid().h() * u.grid().h();
    let measure = m.data().iter().filter(|&&v| v > lambda).count() as f64 * h2;
    let pc = VariableExponent::constant(*u.grid(), Centering::Node, p_minus)?;
    let unit = Weight::unit(*u.grid(), Centering::Node);
    let rho = modular(&grad, &pc, &unit)?;
    if rho == 0.0 {
        return Ok(0.0);
    }
    Ok(lambda.powf(p_minus) * measure / rho)
}
