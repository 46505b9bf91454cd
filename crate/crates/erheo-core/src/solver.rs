//! Regularized coupled solve for (v, omega) by Picard (frozen-coefficient)
//! iteration with backtracking damping, divergence penalty, and the energy /
//! dual-norm diagnostics of the a-priori estimates.
//!
//! Unknowns are node fields vanishing on the boundary; interior values form
//! the dof vector (v1 | v2 | omega blocks). Every pairing is assembled through
//! nine fixed sparse cell maps (value and both derivatives of each unknown,
//! averaged to cell midpoints), so the frozen operator, its diagonal and the
//! exact nonlinear residual all share one quadrature path.

use crate::constitutive::{eps_contract_s, stress_s, KinematicState, StressCoefficients};
use crate::efield::{ElectricField, MaterialFunction};
use crate::error::{Error, Result};
use crate::exponent::{
    conjugate_excluding_zeros, luxembourg_norm, modular, VariableExponent, Weight,
};
use crate::grid::{discrete_gradient, Centering, Field, Grid, Rank};
use crate::linalg::{cg, dot, norm2, Csr};
use crate::tensor::{Mat2, Vec2};

/// Floor for frozen negative-power factors |.|^(p-2), p < 2.
const FREEZE_FLOOR: f64 = 1e-7;
/// Damping underflow threshold.
const THETA_MIN: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct ProblemSetup {
    pub grid: Grid,
    pub e: ElectricField,
    pub p: VariableExponent,
    pub coeffs: StressCoefficients,
    pub material: MaterialFunction,
    /// body force (node vector field)
    pub f: Field,
    /// couple force (node scalar field; scalar micro-rotation in d = 2)
    pub ell: Field,
    pub n_reg: u32,
    pub r_exp: f64,
    pub div_penalty: f64,
    pub convection: bool,
    /// constant in the data bound K = c (1 + ||E||_2 + ||f||_2 + ||l||_2)
    pub bound_constant: f64,
}

/// Default regularization exponent: the admissibility condition is the strict
/// inequality r > 2 (p-)', so take the conservative r = 2 (p-)' + 1.
pub fn default_r_exp(p_minus: f64) -> f64 {
    2.0 * p_minus / (p_minus - 1.0) + 1.0
}

impl ProblemSetup {
    pub fn validate(&self) -> Result<()> {
        if self.p.p_minus() <= 1.0 {
            return Err(Error::Parameter(format!(
                "solver needs p_minus > 2d/(d+2) = 1, got {}",
                self.p.p_minus()
            )));
        }
        let r_min = 2.0 * self.p.p_minus() / (self.p.p_minus() - 1.0);
        if !(self.r_exp > r_min) {
            return Err(Error::Parameter(format!(
                "regularization exponent must satisfy r > 2 (p-)' = {r_min}, got {}",
                self.r_exp
            )));
        }
        if !(self.div_penalty > 0.0) {
            return Err(Error::Parameter("divergence penalty must be positive".into()));
        }
        if self.coeffs.alpha51 < 0.0 || self.coeffs.beta51 < 0.0 {
            return Err(Error::Parameter(
                "the frozen operator needs alpha51, beta51 >= 0".into(),
            ));
        }
        if self.n_reg < 1 {
            return Err(Error::Parameter("regularization index must be >= 1".into()));
        }
        if self.f.rank() != Rank::Vector2
            || self.ell.rank() != Rank::Scalar
            || self.f.grid() != &self.grid
            || self.ell.grid() != &self.grid
            || self.e.grid() != &self.grid
            || self.p.values().grid() != &self.grid
        {
            return Err(Error::GridMismatch);
        }
        self.f.validate_finite()?;
        self.ell.validate_finite()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EnergyReport {
    pub modular_dv: f64,
    pub modular_r_weighted: f64,
    pub modular_grad_omega_weighted: f64,
    /// the 1/n regularization block
    pub reg_terms_scaled: f64,
    pub bound_k: f64,
    /// norm-level quantities of the second a-priori estimate
    pub norm_v_x: f64,
    pub norm_r_weighted: f64,
    pub norm_omega_x: f64,
}

impl EnergyReport {
    pub fn satisfies_bound(&self) -> bool {
        self.modular_dv
            + self.modular_r_weighted
            + self.modular_grad_omega_weighted
            + self.reg_terms_scaled
            <= self.bound_k
    }
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub v: Field,
    pub omega: Field,
    pub iteration: usize,
    pub residual_history: Vec<f64>,
    pub damping_history: Vec<f64>,
    pub converged: bool,
    pub energy: Option<EnergyReport>,
}

impl SolverState {
    pub fn zero(grid: Grid) -> SolverState {
        SolverState {
            v: Field::zeros(grid, Rank::Vector2, Centering::Node),
            omega: Field::zeros(grid, Rank::Scalar, Centering::Node),
            iteration: 0,
            residual_history: Vec::new(),
            damping_history: Vec::new(),
            converged: false,
            energy: None,
        }
    }
}

// cell-map indices: values, Q1 midpoint gradients, and the hourglass
// extraction per component
const M_V1: usize = 0;
const M_G11: usize = 1;
const M_G12: usize = 2;
const M_V2: usize = 3;
const M_G21: usize = 4;
const M_G22: usize = 5;
const M_W: usize = 6;
const M_W1: usize = 7;
const M_W2: usize = 8;
const M_H1: usize = 9;
const M_H2: usize = 10;
const M_HW: usize = 11;
const NMAPS: usize = 12;

/// Values of the cell maps at one cell (same ordering as `M_*`).
type CellVals = [f64; NMAPS];

struct FrozenCoeffs {
    /// (alpha31 + alpha33 |E|^2) (1 + |D|)^(p-2)
    cs1: Vec<f64>,
    /// 2 alpha51 (1 + |D|)^(p-2)
    k51: Vec<f64>,
    /// 2 alpha71 |E|^2 (1 + |R|)^(p-2)
    cr: Vec<f64>,
    /// (beta31 + beta33 |E|^2) (1 + |grad w|)^(p-2)
    cn1: Vec<f64>,
    /// 2 beta51 (1 + |grad w|)^(p-2)
    cn2: Vec<f64>,
    rvg: Vec<f64>,
    rv0: Vec<f64>,
    rwg: Vec<f64>,
    rw0: Vec<f64>,
}

struct System {
    grid: Grid,
    ni_x: usize,
    ni_y: usize,
    ndof: usize,
    maps: Vec<Csr>,
    // cell data
    e1: Vec<f64>,
    e2: Vec<f64>,
    e2tot: Vec<f64>,
    p: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    ell: Vec<f64>,
    h2: f64,
    inv_n: f64,
    r_exp: f64,
    pen: f64,
    coeffs: StressCoefficients,
    material: MaterialFunction,
    convection: bool,
    /// pure data load vector (f, ell terms)
    load: Vec<f64>,
    load_norm: f64,
    /// per cell: (dof, block, value coeff, ddx coeff, ddy coeff, hg coeff)
    cell_dofs: Vec<Vec<(usize, usize, f64, f64, f64, f64)>>,
}

impl System {
    fn build(setup: &ProblemSetup) -> Result<System> {
        setup.validate()?;
        let grid = setup.grid;
        let nx = grid.nx();
        let ny = grid.ny();
        let ni_x = nx - 1;
        let ni_y = ny - 1;
        let ni = ni_x * ni_y;
        let ndof = 3 * ni;
        let ncells = grid.cell_count();
        let h = grid.h();

        let interior = |ix: usize, iy: usize| -> Option<usize> {
            if ix >= 1 && ix <= nx - 1 && iy >= 1 && iy <= ny - 1 {
                Some((iy - 1) * ni_x + (ix - 1))
            } else {
                None
            }
        };

        // Q1 midpoint quadrature: values, gradients and the hourglass
        // extraction of the bilinear interpolant at cell centers. The
        // per-corner coefficients are
        //   value:    1/4 each
        //   d/dx:     -+ 1/(2h) by x-parity
        //   d/dy:     -+ 1/(2h) by y-parity
        //   hourglass: (+1, -1, -1, +1)/(2h) in corner order
        // (central node stencils would be blind to node checkerboards, which
        // makes the frozen operator numerically singular; the hourglass map
        // anchors the one oscillation mode the midpoint gradient misses).
        let mut trips: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); NMAPS];
        for cy in 0..ny {
            for cx in 0..nx {
                let cell = cy * nx + cx;
                for (dx, dy) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1)] {
                    let ix = cx + dx;
                    let iy = cy + dy;
                    let Some(id) = interior(ix, iy) else { continue };
                    let sx = if dx == 0 { -1.0 } else { 1.0 };
                    let sy = if dy == 0 { -1.0 } else { 1.0 };
                    let hg = sx * sy;
                    for (block, mv, mgx, mgy, mh) in [
                        (0usize, M_V1, M_G11, M_G12, M_H1),
                        (1, M_V2, M_G21, M_G22, M_H2),
                        (2, M_W, M_W1, M_W2, M_HW),
                    ] {
                        let col = block * ni + id;
                        trips[mv].push((cell, col, 0.25));
                        trips[mgx].push((cell, col, sx / (2.0 * h)));
                        trips[mgy].push((cell, col, sy / (2.0 * h)));
                        trips[mh].push((cell, col, hg / (2.0 * h)));
                    }
                }
            }
        }
        let maps: Vec<Csr> = trips
            .into_iter()
            .map(|t| Csr::from_triplets(ncells, ndof, t))
            .collect();

        // per-cell dof coefficient lists for the diagonal
        let mut cell_dofs: Vec<Vec<(usize, usize, f64, f64, f64, f64)>> =
            vec![Vec::new(); ncells];
        for cell in 0..ncells {
            let list = &mut cell_dofs[cell];
            let mut add = |dof: usize, slot: usize, v: f64| {
                if let Some(entry) = list.iter_mut().find(|e| e.0 == dof) {
                    match slot {
                        0 => entry.2 += v,
                        1 => entry.3 += v,
                        2 => entry.4 += v,
                        _ => entry.5 += v,
                    }
                } else {
                    let mut e = (dof, dof / ni, 0.0, 0.0, 0.0, 0.0);
                    match slot {
                        0 => e.2 = v,
                        1 => e.3 = v,
                        2 => e.4 = v,
                        _ => e.5 = v,
                    }
                    list.push(e);
                }
            };
            for (map, slot) in [
                (M_V1, 0usize),
                (M_V2, 0),
                (M_W, 0),
                (M_G11, 1),
                (M_G21, 1),
                (M_W1, 1),
                (M_G12, 2),
                (M_G22, 2),
                (M_W2, 2),
                (M_H1, 3),
                (M_H2, 3),
                (M_HW, 3),
            ] {
                let (cols, vals) = maps[map].row(cell);
                for (c, v) in cols.iter().zip(vals) {
                    add(*c, slot, *v);
                }
            }
        }

        // cell data; the cell exponent is p_hat of the cell-interpolated
        // |E|^2, consistent with the frozen-coefficient evaluation
        let ec = setup.e.e.to_cells();
        let fc = setup.f.to_cells();
        let lc = setup.ell.to_cells();
        let e1: Vec<f64> = (0..ncells).map(|s| ec.get(s, 0)).collect();
        let e2: Vec<f64> = (0..ncells).map(|s| ec.get(s, 1)).collect();
        let e2tot: Vec<f64> = (0..ncells)
            .map(|s| e1[s] * e1[s] + e2[s] * e2[s])
            .collect();
        let p: Vec<f64> = (0..ncells).map(|s| setup.material.eval(e2tot[s])).collect();
        let f1: Vec<f64> = (0..ncells).map(|s| fc.get(s, 0)).collect();
        let f2: Vec<f64> = (0..ncells).map(|s| fc.get(s, 1)).collect();
        let ell: Vec<f64> = (0..ncells).map(|s| lc.get(s, 0)).collect();
        let h2 = h * h;

        let mut sys = System {
            grid,
            ni_x,
            ni_y,
            ndof,
            maps,
            e1,
            e2,
            e2tot,
            p,
            f1,
            f2,
            ell,
            h2,
            inv_n: 1.0 / setup.n_reg as f64,
            r_exp: setup.r_exp,
            pen: setup.div_penalty,
            coeffs: setup.coeffs,
            material: setup.material,
            convection: setup.convection,
            load: Vec::new(),
            load_norm: 0.0,
            cell_dofs,
        };
        // pure data load vector
        let ncells = sys.ncells();
        let mut t = vec![[0.0f64; NMAPS]; ncells];
        for c in 0..ncells {
            t[c][M_V1] = -sys.f1[c];
            t[c][M_V2] = -sys.f2[c];
            t[c][M_W] = -sys.ell[c];
        }
        let mut load = vec![0.0; sys.ndof];
        sys.scatter(&t, &mut load);
        sys.load_norm = norm2(&load);
        sys.load = load;
        Ok(sys)
    }

    fn ncells(&self) -> usize {
        self.grid.cell_count()
    }

    fn cell_values(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let ncells = self.ncells();
        (0..NMAPS)
            .map(|m| {
                let mut y = vec![0.0; ncells];
                self.maps[m].matvec(x, &mut y);
                y
            })
            .collect()
    }

    /// out += sum over maps of M^T (h^2 t_map)
    fn scatter(&self, t: &[CellVals], out: &mut [f64]) {
        let ncells = self.ncells();
        let mut buf = vec![0.0; ncells];
        for m in 0..NMAPS {
            for c in 0..ncells {
                buf[c] = t[c][m] * self.h2;
            }
            self.maps[m].matvec_transpose_add(&buf, out);
        }
    }

    fn freeze(&self, x: &[f64]) -> FrozenCoeffs {
        let cv = self.cell_values(x);
        let ncells = self.ncells();
        let co = &self.coeffs;
        let mut fr = FrozenCoeffs {
            cs1: vec![0.0; ncells],
            k51: vec![0.0; ncells],
            cr: vec![0.0; ncells],
            cn1: vec![0.0; ncells],
            cn2: vec![0.0; ncells],
            rvg: vec![0.0; ncells],
            rv0: vec![0.0; ncells],
            rwg: vec![0.0; ncells],
            rw0: vec![0.0; ncells],
        };
        for c in 0..ncells {
            let p = self.p[c];
            let g11 = cv[M_G11][c];
            let g12 = cv[M_G12][c];
            let g21 = cv[M_G21][c];
            let g22 = cv[M_G22][c];
            let w = cv[M_W][c];
            let d12 = 0.5 * (g12 + g21);
            let dfrob = (g11 * g11 + g22 * g22 + 2.0 * d12 * d12).sqrt();
            let r12 = 0.5 * (g12 - g21) + w;
            let rfrob = std::f64::consts::SQRT_2 * r12.abs();
            let wg = cv[M_W1][c].hypot(cv[M_W2][c]);
            let gd = (1.0 + dfrob).powf(p - 2.0);
            let gr = (1.0 + rfrob).powf(p - 2.0);
            let gl = (1.0 + wg).powf(p - 2.0);
            fr.cs1[c] = (co.alpha31 + co.alpha33 * self.e2tot[c]) * gd;
            fr.k51[c] = 2.0 * co.alpha51 * gd;
            fr.cr[c] = 2.0 * co.alpha71 * self.e2tot[c] * gr;
            fr.cn1[c] = (co.beta31 + co.beta33 * self.e2tot[c]) * gl;
            fr.cn2[c] = 2.0 * co.beta51 * gl;
            // regularization factors, with a floor guarding the negative
            // powers at vanishing arguments
            let gfull = (g11 * g11 + g12 * g12 + g21 * g21 + g22 * g22).sqrt();
            let vmag = cv[M_V1][c].hypot(cv[M_V2][c]);
            let wmag = w.abs();
            let wgm = wg;
            let pw = |m: f64, q: f64| -> f64 {
                if q >= 0.0 {
                    m.powf(q)
                } else {
                    m.max(FREEZE_FLOOR).powf(q)
                }
            };
            fr.rvg[c] = pw(gfull, p - 2.0);
            fr.rv0[c] = pw(vmag, p - 2.0) + pw(vmag, self.r_exp - 2.0);
            fr.rwg[c] = pw(wgm, p - 2.0);
            fr.rw0[c] = pw(wmag, p - 2.0) + pw(wmag, self.r_exp - 2.0);
        }
        fr
    }

    /// Linear cell coefficients of the frozen symmetric form at one cell.
    fn frozen_t(&self, fr: &FrozenCoeffs, c: usize, cv: &CellVals) -> CellVals {
        let e1 = self.e1[c];
        let e2 = self.e2[c];
        let g11 = cv[M_G11];
        let g12 = cv[M_G12];
        let g21 = cv[M_G21];
        let g22 = cv[M_G22];
        let w = cv[M_W];
        let w1 = cv[M_W1];
        let w2 = cv[M_W2];
        let d11 = g11;
        let d22 = g22;
        let d12 = 0.5 * (g12 + g21);
        let r12 = 0.5 * (g12 - g21) + w;
        let de1 = d11 * e1 + d12 * e2;
        let de2 = d12 * e1 + d22 * e2;
        let div = g11 + g22;
        let we = w1 * e1 + w2 * e2;
        let inv_n = self.inv_n;
        let mut t = [0.0f64; NMAPS];
        t[M_G11] = fr.cs1[c] * d11 + fr.k51[c] * de1 * e1 + inv_n * fr.rvg[c] * g11 + self.pen * div;
        t[M_G22] = fr.cs1[c] * d22 + fr.k51[c] * de2 * e2 + inv_n * fr.rvg[c] * g22 + self.pen * div;
        let cross = 0.5 * fr.k51[c] * (de1 * e2 + de2 * e1);
        t[M_G12] = fr.cs1[c] * d12 + cross + 0.5 * fr.cr[c] * r12 + inv_n * fr.rvg[c] * g12;
        t[M_G21] = fr.cs1[c] * d12 + cross - 0.5 * fr.cr[c] * r12 + inv_n * fr.rvg[c] * g21;
        t[M_W1] = fr.cn1[c] * w1 + fr.cn2[c] * we * e1 + inv_n * fr.rwg[c] * w1;
        t[M_W2] = fr.cn1[c] * w2 + fr.cn2[c] * we * e2 + inv_n * fr.rwg[c] * w2;
        t[M_V1] = inv_n * fr.rv0[c] * cv[M_V1];
        t[M_V2] = inv_n * fr.rv0[c] * cv[M_V2];
        t[M_W] = fr.cr[c] * r12 + inv_n * fr.rw0[c] * w;
        // hourglass control at the component's own gradient-coefficient scale
        let gamma_v = fr.cs1[c] + inv_n * fr.rvg[c];
        let gamma_w = fr.cn1[c] + inv_n * fr.rwg[c];
        t[M_H1] = gamma_v * cv[M_H1];
        t[M_H2] = gamma_v * cv[M_H2];
        t[M_HW] = gamma_w * cv[M_HW];
        t
    }

    fn apply(&self, fr: &FrozenCoeffs, x: &[f64], out: &mut [f64]) {
        let cv = self.cell_values(x);
        let ncells = self.ncells();
        let mut t = vec![[0.0f64; NMAPS]; ncells];
        for c in 0..ncells {
            let mut vals: CellVals = [0.0; NMAPS];
            for m in 0..NMAPS {
                vals[m] = cv[m][c];
            }
            t[c] = self.frozen_t(fr, c, &vals);
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        self.scatter(&t, out);
    }

    fn diagonal(&self, fr: &FrozenCoeffs) -> Vec<f64> {
        let mut diag = vec![0.0; self.ndof];
        for c in 0..self.ncells() {
            for &(dof, block, val, gx, gy, hg) in &self.cell_dofs[c] {
                let mut mini = [0.0f64; NMAPS];
                match block {
                    0 => {
                        mini[M_V1] = val;
                        mini[M_G11] = gx;
                        mini[M_G12] = gy;
                        mini[M_H1] = hg;
                    }
                    1 => {
                        mini[M_V2] = val;
                        mini[M_G21] = gx;
                        mini[M_G22] = gy;
                        mini[M_H2] = hg;
                    }
                    _ => {
                        mini[M_W] = val;
                        mini[M_W1] = gx;
                        mini[M_W2] = gy;
                        mini[M_HW] = hg;
                    }
                }
                let t = self.frozen_t(fr, c, &mini);
                let mut q = 0.0;
                for m in 0..NMAPS {
                    q += t[m] * mini[m];
                }
                diag[dof] += q * self.h2;
            }
        }
        for d in diag.iter_mut() {
            if *d <= 0.0 || !d.is_finite() {
                *d = 1.0;
            }
        }
        diag
    }

    /// Exact nonlinear residual vector of the regularized weak form.
    fn residual_vector(&self, x: &[f64]) -> Vec<f64> {
        let cv = self.cell_values(x);
        let ncells = self.ncells();
        let co = &self.coeffs;
        let mut t = vec![[0.0f64; NMAPS]; ncells];
        for c in 0..ncells {
            let e = Vec2([self.e1[c], self.e2[c]]);
            let p = self.p[c];
            let g11 = cv[M_G11][c];
            let g12 = cv[M_G12][c];
            let g21 = cv[M_G21][c];
            let g22 = cv[M_G22][c];
            let v1 = cv[M_V1][c];
            let v2 = cv[M_V2][c];
            let w = cv[M_W][c];
            let w1 = cv[M_W1][c];
            let w2 = cv[M_W2][c];
            let grad = Mat2([g11, g12, g21, g22]);
            let d = grad.sym();
            let r = grad.skew().add(crate::tensor::J.scale(w));
            let state = KinematicState {
                d,
                r,
                l: Mat2::ZERO,
                e,
            };
            let s = stress_s(&state, co, &self.material);
            // couple stress, vector reduction for the scalar micro-rotation
            let gl = (1.0 + w1.hypot(w2)).powf(p - 2.0);
            let we = w1 * e.0[0] + w2 * e.0[1];
            let n1 = (co.beta31 + co.beta33 * self.e2tot[c]) * gl * w1
                + 2.0 * co.beta51 * gl * we * e.0[0];
            let n2 = (co.beta31 + co.beta33 * self.e2tot[c]) * gl * w2
                + 2.0 * co.beta51 * gl * we * e.0[1];
            // exact regularization coefficients (zero limit at zero argument)
            let pw0 = |m: f64, q: f64| -> f64 {
                if m == 0.0 {
                    0.0
                } else {
                    m.powf(q)
                }
            };
            let gfull = grad.frob();
            let rvg = pw0(gfull, p - 2.0);
            let vmag = v1.hypot(v2);
            let rv0 = pw0(vmag, p - 2.0) + pw0(vmag, self.r_exp - 2.0);
            let wgm = w1.hypot(w2);
            let rwg = pw0(wgm, p - 2.0);
            let rw0 = pw0(w.abs(), p - 2.0) + pw0(w.abs(), self.r_exp - 2.0);
            let div = g11 + g22;
            let inv_n = self.inv_n;

            let mut tc = [0.0f64; NMAPS];
            tc[M_G11] = s.0[0] + inv_n * rvg * g11 + self.pen * div;
            tc[M_G12] = s.0[1] + inv_n * rvg * g12;
            tc[M_G21] = s.0[2] + inv_n * rvg * g21;
            tc[M_G22] = s.0[3] + inv_n * rvg * g22 + self.pen * div;
            tc[M_W1] = n1 + inv_n * rwg * w1;
            tc[M_W2] = n2 + inv_n * rwg * w2;
            tc[M_V1] = inv_n * rv0 * v1 - self.f1[c];
            tc[M_V2] = inv_n * rv0 * v2 - self.f2[c];
            tc[M_W] = -eps_contract_s(s) + inv_n * rw0 * w - self.ell[c];
            // hourglass control with the state-dependent coefficient
            let gamma_v = (co.alpha31 + co.alpha33 * self.e2tot[c])
                * (1.0 + d.frob()).powf(p - 2.0)
                + inv_n * rvg;
            let gamma_w = (co.beta31 + co.beta33 * self.e2tot[c]) * gl + inv_n * rwg;
            tc[M_H1] = gamma_v * cv[M_H1][c];
            tc[M_H2] = gamma_v * cv[M_H2][c];
            tc[M_HW] = gamma_w * cv[M_HW][c];
            if self.convection {
                tc[M_G11] -= v1 * v1;
                tc[M_G12] -= v1 * v2;
                tc[M_G21] -= v2 * v1;
                tc[M_G22] -= v2 * v2;
                tc[M_W1] -= w * v1;
                tc[M_W2] -= w * v2;
            }
            t[c] = tc;
        }
        let mut r = vec![0.0; self.ndof];
        self.scatter(&t, &mut r);
        r
    }

    /// Right side of the frozen system: data plus explicit convection plus
    /// the alpha91 cross term evaluated at the frozen state.
    fn frozen_rhs(&self, x: &[f64]) -> Vec<f64> {
        let cv = self.cell_values(x);
        let ncells = self.ncells();
        let co = &self.coeffs;
        let mut t = vec![[0.0f64; NMAPS]; ncells];
        for c in 0..ncells {
            let mut tc = [0.0f64; NMAPS];
            tc[M_V1] = self.f1[c];
            tc[M_V2] = self.f2[c];
            tc[M_W] = self.ell[c];
            if self.convection {
                let v1 = cv[M_V1][c];
                let v2 = cv[M_V2][c];
                let w = cv[M_W][c];
                tc[M_G11] += v1 * v1;
                tc[M_G12] += v1 * v2;
                tc[M_G21] += v2 * v1;
                tc[M_G22] += v2 * v2;
                tc[M_W1] += w * v1;
                tc[M_W2] += w * v2;
            }
            if co.alpha91 != 0.0 {
                // symmetric cross term kept explicit: it couples R(x) to the
                // symmetric test tensor and would break the SPD structure
                let e = Vec2([self.e1[c], self.e2[c]]);
                let p = self.p[c];
                let g12 = cv[M_G12][c];
                let g21 = cv[M_G21][c];
                let w = cv[M_W][c];
                let r12 = 0.5 * (g12 - g21) + w;
                let rfrob = std::f64::consts::SQRT_2 * r12.abs();
                let gr = (1.0 + rfrob).powf(p - 2.0);
                let rmat = crate::tensor::J.scale(r12);
                let re = rmat.matvec(e);
                let cross = re.outer(e).add(e.outer(re)).scale(co.alpha91 * gr);
                tc[M_G11] -= cross.0[0];
                tc[M_G12] -= 0.5 * (cross.0[1] + cross.0[2]);
                tc[M_G21] -= 0.5 * (cross.0[1] + cross.0[2]);
                tc[M_G22] -= cross.0[3];
            }
            t[c] = tc;
        }
        let mut rhs = vec![0.0; self.ndof];
        self.scatter(&t, &mut rhs);
        rhs
    }

    fn dofs_from_state(&self, state: &SolverState) -> Vec<f64> {
        let ni = self.ni_x * self.ni_y;
        let mut x = vec![0.0; self.ndof];
        for iy in 1..=self.ni_y {
            for ix in 1..=self.ni_x {
                let id = (iy - 1) * self.ni_x + (ix - 1);
                x[id] = state.v.at(ix, iy, 0);
                x[ni + id] = state.v.at(ix, iy, 1);
                x[2 * ni + id] = state.omega.at(ix, iy, 0);
            }
        }
        x
    }

    fn state_from_dofs(&self, x: &[f64], prev: &SolverState) -> SolverState {
        let ni = self.ni_x * self.ni_y;
        let mut v = Field::zeros(self.grid, Rank::Vector2, Centering::Node);
        let mut omega = Field::zeros(self.grid, Rank::Scalar, Centering::Node);
        for iy in 1..=self.ni_y {
            for ix in 1..=self.ni_x {
                let id = (iy - 1) * self.ni_x + (ix - 1);
                v.set_at(ix, iy, 0, x[id]);
                v.set_at(ix, iy, 1, x[ni + id]);
                omega.set_at(ix, iy, 0, x[2 * ni + id]);
            }
        }
        SolverState {
            v,
            omega,
            iteration: prev.iteration,
            residual_history: prev.residual_history.clone(),
            damping_history: prev.damping_history.clone(),
            converged: false,
            energy: None,
        }
    }

    fn rel_residual(&self, x: &[f64]) -> f64 {
        let r = self.residual_vector(x);
        norm2(&r) / self.load_norm.max(1e-300)
    }

    fn step(&self, state: &SolverState) -> Result<SolverState> {
        let x0 = self.dofs_from_state(state);
        let res0 = self.rel_residual(&x0);
        let fr = self.freeze(&x0);
        let rhs = self.frozen_rhs(&x0);
        let diag = self.diagonal(&fr);
        let mut x_hat = x0.clone();
        let tol_lin = (0.05 * res0).clamp(1e-13, 1e-7);
        let max_lin = 200 * (self.grid.nx() + self.grid.ny()) + 4000;
        let out = cg(
            |x, y| self.apply(&fr, x, y),
            &rhs,
            &mut x_hat,
            tol_lin,
            max_lin,
            Some(&diag),
            |_| {},
        );
        if !out.converged && out.rel_residual > 1e-5 {
            return Err(Error::IterationLimit {
                what: "picard linear solve",
                limit: max_lin,
                residual: out.rel_residual,
            });
        }
        // backtracking: accept the largest step that does not increase the
        // nonlinear residual
        let mut theta = 1.0;
        loop {
            let x_try: Vec<f64> = x0
                .iter()
                .zip(&x_hat)
                .map(|(a, b)| a + theta * (b - a))
                .collect();
            let res_try = self.rel_residual(&x_try);
            if res_try <= res0 * (1.0 + 1e-14) || res0 == 0.0 {
                let mut next = self.state_from_dofs(&x_try, state);
                next.iteration = state.iteration + 1;
                next.residual_history.push(res_try);
                next.damping_history.push(theta);
                return Ok(next);
            }
            theta *= 0.5;
            if theta < THETA_MIN {
                return Err(Error::Stagnation {
                    iteration: state.iteration,
                    theta,
                    residual: res0,
                });
            }
        }
    }
}

/// Evaluate the full weak form at `state` against one test pair; the value is
/// the assembled residual paired with the test function.
pub fn weak_residual(
    state: &SolverState,
    setup: &ProblemSetup,
    test_v: &Field,
    test_omega: &Field,
) -> Result<f64> {
    let scale = test_v.max_abs().max(test_omega.max_abs()).max(1.0);
    let bmax = test_v
        .boundary_max_abs()
        .max(test_omega.boundary_max_abs());
    if bmax > 1e-13 * scale {
        return Err(Error::TestSpace { max_boundary: bmax });
    }
    let sys = System::build(setup)?;
    let x = sys.dofs_from_state(state);
    let r = sys.residual_vector(&x);
    let test_state = SolverState {
        v: test_v.clone(),
        omega: test_omega.clone(),
        ..SolverState::zero(setup.grid)
    };
    let t = sys.dofs_from_state(&test_state);
    Ok(dot(&r, &t))
}

/// One damped Picard step: freeze the nonlinear magnitudes at the current
/// iterate, solve the symmetric positive frozen system jointly for (v, omega),
/// and backtrack so the nonlinear residual does not increase.
pub fn picard_step(state: &SolverState, setup: &ProblemSetup) -> Result<SolverState> {
    let sys = System::build(setup)?;
    sys.step(state)
}

/// Picard iteration from zero until the relative residual drops below `tol`.
/// Non-convergence and stagnation return the last state flagged unconverged.
pub fn solve(setup: &ProblemSetup, tol: f64, max_iter: usize) -> Result<SolverState> {
    let sys = System::build(setup)?;
    let mut state = SolverState::zero(setup.grid);
    if sys.load_norm == 0.0 {
        state.converged = true;
        state.energy = Some(energy_report(&state, setup)?);
        return Ok(state);
    }
    let x0 = sys.dofs_from_state(&state);
    state.residual_history.push(sys.rel_residual(&x0));
    state.damping_history.push(1.0);
    for _ in 0..max_iter {
        let last = *state.residual_history.last().unwrap();
        if last <= tol {
            break;
        }
        state = match sys.step(&state) {
            Ok(s) => s,
            Err(Error::Stagnation { .. }) => {
                state.converged = false;
                state.energy = Some(energy_report(&state, setup)?);
                return Ok(state);
            }
            Err(e) => return Err(e),
        };
    }
    let reached = *state.residual_history.last().unwrap() <= tol;
    let energy = energy_report(&state, setup)?;
    state.converged = reached && energy.satisfies_bound();
    state.energy = Some(energy);
    Ok(state)
}

/// The three weighted modulars of the a-priori energy estimate, the scaled
/// 1/n regularization block, and the data bound K.
pub fn energy_report(state: &SolverState, setup: &ProblemSetup) -> Result<EnergyReport> {
    let grid = setup.grid;
    let unit = Weight::unit(grid, Centering::Node);
    let sigma = setup.e.weight();
    let grad_v = discrete_gradient(&state.v)?;
    let (dv, _) = crate::grid::sym_skew_split(&grad_v)?;
    let r = crate::constitutive::micro_rotation_tensor(&grad_v, &state.omega)?;
    let grad_w = discrete_gradient(&state.omega)?;

    let modular_dv = modular(&dv, &setup.p, &unit)?;
    let modular_r_weighted = modular(&r, &setup.p, &sigma)?;
    let modular_grad_omega_weighted = modular(&grad_w, &setup.p, &sigma)?;

    let rc = VariableExponent::constant(grid, Centering::Node, setup.r_exp)?;
    let reg = modular(&grad_v, &setup.p, &unit)?
        + modular(&state.v, &setup.p, &unit)?
        + modular(&state.v, &rc, &unit)?
        + modular(&grad_w, &setup.p, &unit)?
        + modular(&state.omega, &setup.p, &unit)?
        + modular(&state.omega, &rc, &unit)?;
    let reg_terms_scaled = reg / setup.n_reg as f64;

    let two = VariableExponent::constant(grid, Centering::Node, 2.0)?;
    let l2 = |f: &Field| -> Result<f64> { Ok(modular(f, &two, &unit)?.sqrt()) };
    let bound_k = setup.bound_constant
        * (1.0 + l2(&setup.e.e)? + l2(&setup.f)? + l2(&setup.ell)?);

    // norm-level quantities of the second estimate
    let pm = setup.p.p_minus();
    let pmc = VariableExponent::constant(grid, Centering::Node, pm)?;
    let norm_v_x = modular(&state.v, &pmc, &unit)?.powf(1.0 / pm)
        + luxembourg_norm(&dv, &setup.p, &unit)?;
    let norm_r_weighted = luxembourg_norm(&r, &setup.p, &sigma)?;
    let norm_omega_x = modular(&state.omega, &pmc, &sigma)?.powf(1.0 / pm)
        + luxembourg_norm(&grad_w, &setup.p, &sigma)?;

    Ok(EnergyReport {
        modular_dv,
        modular_r_weighted,
        modular_grad_omega_weighted,
        reg_terms_scaled,
        bound_k,
        norm_v_x,
        norm_r_weighted,
        norm_omega_x,
    })
}

/// Dual-norm triple (||S||_{p'}, ||S^skew||_{p', dual weight},
/// ||N||_{p', dual weight}) at the current state, with sites where E vanishes
/// excluded from the weighted norms.
pub fn stress_norm_report(state: &SolverState, setup: &ProblemSetup) -> Result<(f64, f64, f64)> {
    let grid = setup.grid;
    let sys = System::build(setup)?;
    let x = sys.dofs_from_state(state);
    let cv = sys.cell_values(&x);
    let ncells = sys.ncells();

    let mut s_field = Field::zeros(grid, Rank::Tensor2x2, Centering::Cell);
    let mut s_skew = Field::zeros(grid, Rank::Tensor2x2, Centering::Cell);
    let mut n_field = Field::zeros(grid, Rank::Vector2, Centering::Cell);
    for c in 0..ncells {
        let e = Vec2([sys.e1[c], sys.e2[c]]);
        let grad = Mat2([cv[M_G11][c], cv[M_G12][c], cv[M_G21][c], cv[M_G22][c]]);
        let d = grad.sym();
        let r = grad.skew().add(crate::tensor::J.scale(cv[M_W][c]));
        let s = stress_s(
            &KinematicState {
                d,
                r,
                l: Mat2::ZERO,
                e,
            },
            &sys.coeffs,
            &sys.material,
        );
        let p = sys.p[c];
        let w1 = cv[M_W1][c];
        let w2 = cv[M_W2][c];
        let gl = (1.0 + w1.hypot(w2)).powf(p - 2.0);
        let we = w1 * e.0[0] + w2 * e.0[1];
        let n1 = (sys.coeffs.beta31 + sys.coeffs.beta33 * sys.e2tot[c]) * gl * w1
            + 2.0 * sys.coeffs.beta51 * gl * we * e.0[0];
        let n2 = (sys.coeffs.beta31 + sys.coeffs.beta33 * sys.e2tot[c]) * gl * w2
            + 2.0 * sys.coeffs.beta51 * gl * we * e.0[1];
        for k in 0..4 {
            s_field.set(c, k, s.0[k]);
            s_skew.set(c, k, s.skew().0[k]);
        }
        n_field.set(c, 0, n1);
        n_field.set(c, 1, n2);
    }

    let unit = Weight::unit(grid, Centering::Node);
    let p_dual = setup.p.conjugate()?;
    let s_norm = luxembourg_norm(&s_field, &p_dual, &unit)?;
    let sigma = setup.e.weight();
    let (p_dual_w, sigma_dual) = conjugate_excluding_zeros(&setup.p, &sigma)?;
    let s_skew_norm = luxembourg_norm(&s_skew, &p_dual_w, &sigma_dual)?;
    let n_norm = luxembourg_norm(&n_field, &p_dual_w, &sigma_dual)?;
    Ok((s_norm, s_skew_norm, n_norm))
}
