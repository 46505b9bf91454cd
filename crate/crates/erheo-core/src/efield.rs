//! Quasi-static electric field: potential-form Neumann solve, shear exponent
//! construction p = p_hat(|E|^2), and the diagnostics that witness the loss of
//! log-Hoelder continuity on the singular boundary-data example.

use crate::error::{Error, Result};
use crate::exponent::{modular_on, VariableExponent, Weight};
use crate::grid::{discrete_divergence, discrete_gradient, Centering, Field, Grid, Rank, Rect};
use crate::linalg::{cg, subtract_mean};
use crate::util::pairwise_sum;

/// Relative residual target for the potential solve.
pub const NEUMANN_TOL: f64 = 1e-10;

/// Material function p_hat mapping t = |E|^2 to the shear exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaterialKind {
    /// p_hat(t) = 1 / log(e + 1/t); vanishing lower bound, diagnostics only.
    Remark34,
    /// p_hat(t) = p_base + a / log(e + 1/t) with p_base > 1, a >= 0.
    Shifted,
}

#[derive(Clone, Copy, Debug)]
pub struct MaterialFunction {
    pub kind: MaterialKind,
    pub p_base: f64,
    pub a: f64,
}

impl MaterialFunction {
    pub fn remark34() -> MaterialFunction {
        MaterialFunction {
            kind: MaterialKind::Remark34,
            p_base: 0.0,
            a: 1.0,
        }
    }

    pub fn shifted(p_base: f64, a: f64) -> Result<MaterialFunction> {
        if !(p_base > 1.0) || !(a >= 0.0) {
            return Err(Error::Parameter(format!(
                "shifted material needs p_base > 1 and a >= 0 (got p_base = {p_base}, a = {a})"
            )));
        }
        Ok(MaterialFunction {
            kind: MaterialKind::Shifted,
            p_base,
            a,
        })
    }

    /// Constant exponent, realized as the shifted kind with a = 0.
    pub fn constant(p: f64) -> Result<MaterialFunction> {
        MaterialFunction::shifted(p, 0.0)
    }

    /// Evaluate p_hat(t) for t >= 0, with the removable limit at t = 0.
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let bump = if t == 0.0 {
            0.0
        } else {
            1.0 / (std::f64::consts::E + 1.0 / t).ln()
        };
        match self.kind {
            MaterialKind::Remark34 => bump,
            MaterialKind::Shifted => self.p_base + self.a * bump,
        }
    }

    /// Sampled validation: monotone nondecreasing in t and a finite sampled
    /// log-Hoelder constant in t. Returns that constant.
    pub fn validate_by_sampling(&self) -> Result<f64> {
        let ts: Vec<f64> = (0..400)
            .map(|k| if k == 0 { 0.0 } else { 1e-6 * 1.06f64.powi(k) })
            .collect();
        let mut c_log = 0.0f64;
        for i in 0..ts.len() {
            for j in (i + 1)..ts.len() {
                let (pi, pj) = (self.eval(ts[i]), self.eval(ts[j]));
                if pj < pi - 1e-14 {
                    return Err(Error::Parameter(format!(
                        "material function not monotone between t = {} and t = {}",
                        ts[i], ts[j]
                    )));
                }
                let d = ts[j] - ts[i];
                c_log = c_log.max((pj - pi).abs() * (std::f64::consts::E + 1.0 / d).ln());
            }
        }
        Ok(c_log)
    }
}

/// Boundary data E0 . n sampled per edge node. Corners carry one value per
/// incident edge.
#[derive(Clone, Debug)]
pub struct BoundaryFlux {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl BoundaryFlux {
    pub fn zero(grid: &Grid) -> BoundaryFlux {
        BoundaryFlux {
            left: vec![0.0; grid.nodes_y()],
            right: vec![0.0; grid.nodes_y()],
            bottom: vec![0.0; grid.nodes_x()],
            top: vec![0.0; grid.nodes_x()],
        }
    }

    /// Build the flux E0 . n from a vector field E0(x, y).
    pub fn from_e0<F: Fn(f64, f64) -> (f64, f64)>(grid: &Grid, e0: F) -> BoundaryFlux {
        let (x0, x1) = grid.x_range();
        let (y0, y1) = grid.y_range();
        let h = grid.h();
        let mut f = BoundaryFlux::zero(grid);
        for j in 0..grid.nodes_y() {
            let y = y0 + j as f64 * h;
            f.left[j] = -e0(x0, y).0;
            f.right[j] = e0(x1, y).0;
        }
        for i in 0..grid.nodes_x() {
            let x = x0 + i as f64 * h;
            f.bottom[i] = -e0(x, y0).1;
            f.top[i] = e0(x, y1).1;
        }
        f
    }

    fn check_lengths(&self, grid: &Grid) -> Result<()> {
        if self.left.len() != grid.nodes_y()
            || self.right.len() != grid.nodes_y()
            || self.bottom.len() != grid.nodes_x()
            || self.top.len() != grid.nodes_x()
        {
            return Err(Error::InvalidInput(
                "boundary flux arrays do not match the grid".into(),
            ));
        }
        Ok(())
    }

    /// Trapezoidal contour integral of g over the boundary.
    pub fn contour_integral(&self, grid: &Grid) -> f64 {
        let h = grid.h();
        let edge = |v: &[f64]| -> f64 {
            let inner: f64 = v[1..v.len() - 1].iter().sum();
            h * (inner + 0.5 * (v[0] + v[v.len() - 1]))
        };
        edge(&self.left) + edge(&self.right) + edge(&self.bottom) + edge(&self.top)
    }

    pub fn max_abs(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .chain(&self.bottom)
            .chain(&self.top)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// First component of the singular boundary data: 1/log(|log(|y|/4)|) with
/// the removable limit 0 at y = 0.
pub fn remark34_e0(y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    1.0 / (y.abs() / 4.0).ln().abs().ln()
}

/// The domain of the singular example: [-2, 0] x [-1, 1].
pub fn remark34_grid(n: usize) -> Grid {
    Grid::new((-2.0, 0.0), (-1.0, 1.0), n, n).expect("remark34 grid")
}

pub fn remark34_flux(grid: &Grid) -> BoundaryFlux {
    BoundaryFlux::from_e0(grid, |_, y| (remark34_e0(y), 0.0))
}

/// Potential, reconstructed field, and the grid they live on.
#[derive(Clone, Debug)]
pub struct ElectricField {
    pub potential: Field,
    pub e: Field,
    grid: Grid,
}

#[derive(Clone, Copy, Debug)]
pub struct HarmonicityReport {
    /// Max interior residual of the compact five-point operator that was
    /// solved; this sits at the solver tolerance.
    pub compact_max: f64,
    /// Max interior |div grad u| of the reconstructed field (wide stencil).
    pub composed_max: f64,
    /// Integral (h^2-weighted l1) interior norm of div grad u. On singular
    /// data this is the quantity that decays under refinement; the max norm
    /// is dominated by the nodes next to the singular boundary point.
    pub composed_l1: f64,
}

impl ElectricField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The canonical weight sigma = |E|^2 on nodes.
    pub fn weight(&self) -> Weight {
        let mag = self.e.magnitude();
        let mut sq = mag.clone();
        for v in sq.data_mut() {
            *v = *v * *v;
        }
        Weight::new(sq).expect("|E|^2 weight")
    }

    pub fn harmonicity(&self) -> HarmonicityReport {
        let u = &self.potential;
        let g = &self.grid;
        let h = g.h();
        let mut compact = 0.0f64;
        for iy in 1..g.ny() {
            for ix in 1..g.nx() {
                let lap = (u.at(ix + 1, iy, 0)
                    + u.at(ix - 1, iy, 0)
                    + u.at(ix, iy + 1, 0)
                    + u.at(ix, iy - 1, 0)
                    - 4.0 * u.at(ix, iy, 0))
                    / (h * h);
                compact = compact.max(lap.abs());
            }
        }
        let div = discrete_divergence(&self.e).expect("div E");
        let mut composed_max = 0.0f64;
        let mut terms = Vec::with_capacity((g.nx() - 1) * (g.ny() - 1));
        for iy in 1..g.ny() {
            for ix in 1..g.nx() {
                let v = div.at(ix, iy, 0).abs();
                composed_max = composed_max.max(v);
                terms.push(v * h * h);
            }
        }
        HarmonicityReport {
            compact_max: compact,
            composed_max,
            composed_l1: pairwise_sum(&terms),
        }
    }
}

/// Solve -lap u = 0 with du/dn = g by the five-point stencil with ghost-node
/// closure, scaled symmetric (weights 1, 1/2, 1/4), CG with mean-zero
/// projection, then reconstruct E = grad u.
pub fn solve_neumann_harmonic(flux: &BoundaryFlux, grid: &Grid) -> Result<ElectricField> {
    flux.check_lengths(grid)?;
    let gmax = flux.max_abs();
    let contour = flux.contour_integral(grid);
    if gmax > 0.0 {
        let tol = 1e-8 * grid.perimeter() * gmax;
        if contour.abs() > tol {
            return Err(Error::IncompatibleFlux {
                integral: contour,
                tol,
            });
        }
    }

    let n1 = grid.nodes_x();
    let n2 = grid.nodes_y();
    let n = n1 * n2;
    let h = grid.h();
    let nx = grid.nx();
    let ny = grid.ny();

    let weight = |ix: usize, iy: usize| -> f64 {
        let wx = if ix == 0 || ix == nx { 0.5 } else { 1.0 };
        let wy = if iy == 0 || iy == ny { 0.5 } else { 1.0 };
        wx * wy
    };

    let apply = |u: &[f64], out: &mut [f64]| {
        for iy in 0..n2 {
            for ix in 0..n1 {
                // mirrored (homogeneous-ghost) neighbors
                let xl = if ix == 0 { u[iy * n1 + 1] } else { u[iy * n1 + ix - 1] };
                let xr = if ix == nx {
                    u[iy * n1 + nx - 1]
                } else {
                    u[iy * n1 + ix + 1]
                };
                let yl = if iy == 0 {
                    u[n1 + ix]
                } else {
                    u[(iy - 1) * n1 + ix]
                };
                let yr = if iy == ny {
                    u[(ny - 1) * n1 + ix]
                } else {
                    u[(iy + 1) * n1 + ix]
                };
                out[iy * n1 + ix] =
                    weight(ix, iy) * (4.0 * u[iy * n1 + ix] - xl - xr - yl - yr);
            }
        }
    };

    // scaled right side: h * g per edge membership, halved at edge endpoints
    let mut b = vec![0.0; n];
    let endf = |k: usize, last: usize| if k == 0 || k == last { 0.5 } else { 1.0 };
    for iy in 0..n2 {
        b[iy * n1] += h * flux.left[iy] * endf(iy, ny);
        b[iy * n1 + nx] += h * flux.right[iy] * endf(iy, ny);
    }
    for ix in 0..n1 {
        b[ix] += h * flux.bottom[ix] * endf(ix, nx);
        b[(ny) * n1 + ix] += h * flux.top[ix] * endf(ix, nx);
    }
    subtract_mean(&mut b);

    let mut u = vec![0.0; n];
    if gmax > 0.0 {
        let diag: Vec<f64> = (0..n)
            .map(|s| 4.0 * weight(s % n1, s / n1))
            .collect();
        let max_iter = 60 * (nx + ny) + 2000;
        let out = cg(
            apply,
            &b,
            &mut u,
            NEUMANN_TOL,
            max_iter,
            Some(&diag),
            subtract_mean,
        );
        if !out.converged {
            return Err(Error::IterationLimit {
                what: "neumann potential solve",
                limit: max_iter,
                residual: out.rel_residual,
            });
        }
    }
    subtract_mean(&mut u);

    let mut potential = Field::zeros(*grid, Rank::Scalar, Centering::Node);
    potential.data_mut().copy_from_slice(&u);
    potential.validate_finite()?;
    let e = discrete_gradient(&potential)?;
    Ok(ElectricField {
        potential,
        e,
        grid: *grid,
    })
}

/// Shear exponent p = p_hat(|E|^2) on nodes, with cached limit exponents.
/// `solver_warning` flags a lower bound at or below 2d/(d+2) = 1 (d = 2),
/// which the flow solver rejects at entry.
#[derive(Clone, Debug)]
pub struct ShearExponent {
    pub p: VariableExponent,
    pub solver_warning: bool,
}

pub fn shear_exponent(e: &ElectricField, m: &MaterialFunction) -> Result<ShearExponent> {
    e.e.validate_finite()?;
    let mag = e.e.magnitude();
    let mut vals = mag.clone();
    for v in vals.data_mut() {
        *v = m.eval(*v * *v);
    }
    let p = VariableExponent::new(vals)?;
    Ok(ShearExponent {
        solver_warning: p.p_minus() <= 1.0,
        p,
    })
}

/// D_k = |p(x_k) - p(x*)| log(e + 1/|x_k - x*|) with p read at the nearest
/// grid site. A point whose nearest site coincides with the target's is
/// re-snapped to the site adjacent to the target in the approach direction,
/// so the sequence never collapses onto its limit.
pub fn blowup_diagnostic(
    p: &VariableExponent,
    points: &[(f64, f64)],
    target: (f64, f64),
) -> Vec<f64> {
    let f = p.values();
    let snap = |x: f64, y: f64| -> (usize, usize) {
        let (x0, y0) = f.site_pos(0, 0);
        let h = f.grid().h();
        let ix = ((x - x0) / h + 0.5).floor().clamp(0.0, (f.sites_x() - 1) as f64) as usize;
        let iy = ((y - y0) / h + 0.5).floor().clamp(0.0, (f.sites_y() - 1) as f64) as usize;
        (ix, iy)
    };
    let (tix, tiy) = snap(target.0, target.1);
    let p_star = f.at(tix, tiy, 0);
    points
        .iter()
        .map(|&(x, y)| {
            let dist = (x - target.0).hypot(y - target.1);
            if dist == 0.0 {
                return 0.0;
            }
            let (mut ix, mut iy) = snap(x, y);
            if (ix, iy) == (tix, tiy) {
                let sx = (x - target.0).signum();
                let sy = (y - target.1).signum();
                if (x - target.0).abs() >= (y - target.1).abs() {
                    ix = (ix as i64 + sx as i64).clamp(0, (f.sites_x() - 1) as i64) as usize;
                } else {
                    iy = (iy as i64 + sy as i64).clamp(0, (f.sites_y() - 1) as i64) as usize;
                }
            }
            let dp = (f.at(ix, iy, 0) - p_star).abs();
            dp * (std::f64::consts::E + 1.0 / dist).ln()
        })
        .collect()
}

/// Empirical constant of the weighted local embedding: the quotient
/// ||w||_{L^r(inner; |E|^{alpha r})} / (||w||_{p,|E|^2} + ||grad w||_{p,|E|^2})
/// for a constant exponent p.
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingCheck {
    pub quotient: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub degenerate: bool,
}

pub fn weighted_embedding_check(
    omega: &Field,
    e: &ElectricField,
    p: f64,
    alpha: f64,
    r: f64,
    inner: Rect,
) -> Result<EmbeddingCheck> {
    let d = 2.0;
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("embedding needs p >= 1, got {p}")));
    }
    if alpha < 1.0 + 2.0 / p {
        return Err(Error::Parameter(format!(
            "embedding needs alpha >= 1 + 2/p = {}, got {alpha}",
            1.0 + 2.0 / p
        )));
    }
    if r < 1.0 {
        return Err(Error::Parameter("embedding needs r >= 1".into()));
    }
    if p < d {
        let p_star = d * p / (d - p);
        if r > p_star {
            return Err(Error::Parameter(format!(
                "r = {r} exceeds p* = {p_star}"
            )));
        }
    } else if p == d && !r.is_finite() {
        return Err(Error::Parameter("r must be finite when p = d".into()));
    }
    if !inner.strictly_inside(e.grid()) {
        return Err(Error::Parameter(
            "inner rectangle must be strictly inside the domain".into(),
        ));
    }
    if omega.grid() != e.grid() {
        return Err(Error::GridMismatch);
    }

    let grid = *e.grid();
    let mag = e.e.magnitude();
    let mut w_num = mag.clone();
    for v in w_num.data_mut() {
        *v = v.powf(alpha * r);
    }
    let w_num = Weight::new(w_num)?;
    let p_r = VariableExponent::constant(grid, Centering::Node, r)?;
    let numerator = modular_on(omega, &p_r, &w_num, Some(&inner))?.powf(1.0 / r);

    let sigma = e.weight();
    let p_c = VariableExponent::constant(grid, Centering::Node, p)?;
    let n_w = modular_on(omega, &p_c, &sigma, None)?.powf(1.0 / p);
    let grad = discrete_gradient(omega)?;
    let n_g = modular_on(&grad, &p_c, &sigma, None)?.powf(1.0 / p);
    let denominator = n_w + n_g;

    if denominator == 0.0 {
        return Ok(EmbeddingCheck {
            quotient: 0.0,
            numerator,
            denominator,
            degenerate: true,
        });
    }
    Ok(EmbeddingCheck {
        quotient: numerator / denominator,
        numerator,
        denominator,
        degenerate: false,
    })
}
