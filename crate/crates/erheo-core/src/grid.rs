//! Uniform 2-D grids, discrete fields and the shared difference operators.
//!
//! Unknowns live on nodes, quadrature values on cell midpoints; node fields
//! are moved to cells by bilinear (four-corner) averaging. Gradients use
//! central differences at interior nodes and second-order one-sided stencils
//! on the boundary, so affine fields differentiate exactly everywhere.

use crate::error::{Error, Result};
use std::io::Write;

/// Uniform rectangular grid with square cells (hx = hy).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
    h: f64,
}

impl Grid {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Grid> {
        let (x_min, x_max) = x_range;
        let (y_min, y_max) = y_range;
        if !(x_max > x_min && y_max > y_min) {
            return Err(Error::Parameter("grid ranges must be nonempty".into()));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Parameter(format!(
                "grid needs nx, ny >= 2, got {nx} x {ny}"
            )));
        }
        let hx = (x_max - x_min) / nx as f64;
        let hy = (y_max - y_min) / ny as f64;
        if (hx - hy).abs() > 1e-12 * hx.abs().max(hy.abs()) {
            return Err(Error::Parameter(format!(
                "cells must be square: hx = {hx}, hy = {hy}"
            )));
        }
        Ok(Grid {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
            h: hx,
        })
    }

    /// `[0,1]^2` with n x n cells.
    pub fn unit(n: usize) -> Grid {
        Grid::new((0.0, 1.0), (0.0, 1.0), n, n).expect("unit grid")
    }

    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn x_range(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }
    pub fn y_range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }
    pub fn nodes_x(&self) -> usize {
        self.nx + 1
    }
    pub fn nodes_y(&self) -> usize {
        self.ny + 1
    }
    pub fn node_count(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }
    pub fn perimeter(&self) -> f64 {
        2.0 * (self.x_max - self.x_min) + 2.0 * (self.y_max - self.y_min)
    }
    pub fn diameter(&self) -> f64 {
        let dx = self.x_max - self.x_min;
        let dy = self.y_max - self.y_min;
        dx.hypot(dy)
    }

    pub fn node_pos(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x_min + ix as f64 * self.h,
            self.y_min + iy as f64 * self.h,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.x_min + (ix as f64 + 0.5) * self.h,
            self.y_min + (iy as f64 + 0.5) * self.h,
        )
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_x() + ix
    }

    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn is_boundary_node(&self, ix: usize, iy: usize) -> bool {
        ix == 0 || iy == 0 || ix == self.nx || iy == self.ny
    }

    /// Nearest node to (x, y), ties rounded away from the domain minimum,
    /// clamped to the grid.
    pub fn nearest_node(&self, x: f64, y: f64) -> (usize, usize) {
        let fx = ((x - self.x_min) / self.h + 0.5).floor();
        let fy = ((y - self.y_min) / self.h + 0.5).floor();
        let ix = fx.clamp(0.0, self.nx as f64) as usize;
        let iy = fy.clamp(0.0, self.ny as f64) as usize;
        (ix, iy)
    }

    /// Grid on the same box with every cell split in two per axis.
    pub fn refined(&self) -> Grid {
        Grid {
            nx: self.nx * 2,
            ny: self.ny * 2,
            h: self.h * 0.5,
            ..*self
        }
    }
}

/// Axis-aligned rectangle, used for sub-domains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Rect {
        Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Strictly inside the grid's box (positive margin on every side).
    pub fn strictly_inside(&self, grid: &Grid) -> bool {
        let (x0, x1) = grid.x_range();
        let (y0, y1) = grid.y_range();
        self.x_min > x0 && self.x_max < x1 && self.y_min > y0 && self.y_max < y1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector2,
    Tensor2x2,
}

impl Rank {
    pub fn components(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector2 => 2,
            Rank::Tensor2x2 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector2 => "vector2",
            Rank::Tensor2x2 => "tensor2x2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Centering {
    Node,
    Cell,
}

/// Sampled field on a [`Grid`]: `components(rank)` reals per site, sites
/// ordered row-major by y then x.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    rank: Rank,
    centering: Centering,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid, rank: Rank, centering: Centering) -> Field {
        let sites = match centering {
            Centering::Node => grid.node_count(),
            Centering::Cell => grid.cell_count(),
        };
        Field {
            grid,
            rank,
            centering,
            data: vec![0.0; sites * rank.components()],
        }
    }

    pub fn from_fn<F>(grid: Grid, rank: Rank, centering: Centering, mut f: F) -> Field
    where
        F: FnMut(f64, f64, usize) -> f64,
    {
        let mut out = Field::zeros(grid, rank, centering);
        let nc = rank.components();
        for iy in 0..out.sites_y() {
            for ix in 0..out.sites_x() {
                let (x, y) = out.site_pos(ix, iy);
                let s = out.site_index(ix, iy);
                for c in 0..nc {
                    out.data[s * nc + c] = f(x, y, c);
                }
            }
        }
        out
    }

    pub fn scalar_from_fn<F: FnMut(f64, f64) -> f64>(
        grid: Grid,
        centering: Centering,
        mut f: F,
    ) -> Field {
        Field::from_fn(grid, Rank::Scalar, centering, |x, y, _| f(x, y))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn rank(&self) -> Rank {
        self.rank
    }
    pub fn centering(&self) -> Centering {
        self.centering
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn components(&self) -> usize {
        self.rank.components()
    }

    pub fn sites_x(&self) -> usize {
        match self.centering {
            Centering::Node => self.grid.nodes_x(),
            Centering::Cell => self.grid.nx(),
        }
    }

    pub fn sites_y(&self) -> usize {
        match self.centering {
            Centering::Node => self.grid.nodes_y(),
            Centering::Cell => self.grid.ny(),
        }
    }

    pub fn site_count(&self) -> usize {
        self.sites_x() * self.sites_y()
    }

    pub fn site_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.sites_x() + ix
    }

    pub fn site_pos(&self, ix: usize, iy: usize) -> (f64, f64) {
        match self.centering {
            Centering::Node => self.grid.node_pos(ix, iy),
            Centering::Cell => self.grid.cell_center(ix, iy),
        }
    }

    pub fn get(&self, site: usize, comp: usize) -> f64 {
        self.data[site * self.components() + comp]
    }

    pub fn set(&mut self, site: usize, comp: usize, v: f64) {
        let nc = self.components();
        self.data[site * nc + comp] = v;
    }

    pub fn at(&self, ix: usize, iy: usize, comp: usize) -> f64 {
        self.get(self.site_index(ix, iy), comp)
    }

    pub fn set_at(&mut self, ix: usize, iy: usize, comp: usize, v: f64) {
        let s = self.site_index(ix, iy);
        self.set(s, comp, v);
    }

    pub fn same_layout(&self, other: &Field) -> bool {
        self.grid == other.grid && self.centering == other.centering
    }

    pub fn validate_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("field contains NaN/Inf samples".into()))
        }
    }

    /// Bilinear node-to-cell averaging; cell fields pass through.
    pub fn to_cells(&self) -> Field {
        match self.centering {
            Centering::Cell => self.clone(),
            Centering::Node => {
                let nc = self.components();
                let mut out = Field::zeros(self.grid, self.rank, Centering::Cell);
                for iy in 0..self.grid.ny() {
                    for ix in 0..self.grid.nx() {
                        let s00 = self.site_index(ix, iy);
                        let s10 = self.site_index(ix + 1, iy);
                        let s01 = self.site_index(ix, iy + 1);
                        let s11 = self.site_index(ix + 1, iy + 1);
                        let sc = out.site_index(ix, iy);
                        for c in 0..nc {
                            let v = 0.25
                                * (self.data[s00 * nc + c]
                                    + self.data[s10 * nc + c]
                                    + self.data[s01 * nc + c]
                                    + self.data[s11 * nc + c]);
                            out.data[sc * nc + c] = v;
                        }
                    }
                }
                out
            }
        }
    }

    /// Pointwise Euclidean/Frobenius magnitude as a scalar field.
    pub fn magnitude(&self) -> Field {
        let nc = self.components();
        let mut out = Field::zeros(self.grid, Rank::Scalar, self.centering);
        for s in 0..self.site_count() {
            let mut q = 0.0;
            for c in 0..nc {
                let v = self.data[s * nc + c];
                q += v * v;
            }
            out.data[s] = q.sqrt();
        }
        out
    }

    /// self <- self + t * other
    pub fn axpy(&mut self, t: f64, other: &Field) -> Result<()> {
        if !self.same_layout(other) || self.rank != other.rank {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += t * b;
        }
        Ok(())
    }

    pub fn scaled(&self, t: f64) -> Field {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= t;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Force exact zeros on the boundary nodes (node fields only).
    pub fn zero_boundary(&mut self) {
        assert_eq!(self.centering, Centering::Node);
        let nc = self.components();
        for iy in 0..self.sites_y() {
            for ix in 0..self.sites_x() {
                if self.grid.is_boundary_node(ix, iy) {
                    let s = self.site_index(ix, iy);
                    for c in 0..nc {
                        self.data[s * nc + c] = 0.0;
                    }
                }
            }
        }
    }

    /// Max |value| over boundary nodes (node fields only).
    pub fn boundary_max_abs(&self) -> f64 {
        assert_eq!(self.centering, Centering::Node);
        let nc = self.components();
        let mut m = 0.0f64;
        for iy in 0..self.sites_y() {
            for ix in 0..self.sites_x() {
                if self.grid.is_boundary_node(ix, iy) {
                    let s = self.site_index(ix, iy);
                    for c in 0..nc {
                        m = m.max(self.data[s * nc + c].abs());
                    }
                }
            }
        }
        m
    }

    /// CSV export: `x,y,c0[,c1[,c2,c3]]`, row-major by y then x, 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let nc = self.components();
        let header = match self.rank {
            Rank::Scalar => "x,y,c0",
            Rank::Vector2 => "x,y,c0,c1",
            Rank::Tensor2x2 => "x,y,c0,c1,c2,c3",
        };
        writeln!(w, "{header}")?;
        for iy in 0..self.sites_y() {
            for ix in 0..self.sites_x() {
                let (x, y) = self.site_pos(ix, iy);
                let s = self.site_index(ix, iy);
                write!(w, "{}", fmt17(x))?;
                write!(w, ",{}", fmt17(y))?;
                for c in 0..nc {
                    write!(w, ",{}", fmt17(self.data[s * nc + c]))?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// 17-significant-digit formatting used by every CSV artifact.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn require_node_scalar_or_vector(u: &Field) -> Result<()> {
    if u.centering() != Centering::Node {
        return Err(Error::InvalidInput(
            "difference operators need node-centered input".into(),
        ));
    }
    if u.rank() == Rank::Tensor2x2 {
        return Err(Error::RankMismatch {
            expected: "scalar or vector2",
            got: "tensor2x2",
        });
    }
    if u.grid().nodes_x() < 3 || u.grid().nodes_y() < 3 {
        return Err(Error::Parameter(
            "gradient stencils need at least 3 nodes per axis".into(),
        ));
    }
    Ok(())
}

/// d/dx of one component along a row of nodes.
#[inline]
fn ddx(u: &Field, ix: usize, iy: usize, comp: usize, h: f64) -> f64 {
    let n = u.sites_x() - 1;
    if ix == 0 {
        (-3.0 * u.at(0, iy, comp) + 4.0 * u.at(1, iy, comp) - u.at(2, iy, comp)) / (2.0 * h)
    } else if ix == n {
        (3.0 * u.at(n, iy, comp) - 4.0 * u.at(n - 1, iy, comp) + u.at(n - 2, iy, comp)) / (2.0 * h)
    } else {
        (u.at(ix + 1, iy, comp) - u.at(ix - 1, iy, comp)) / (2.0 * h)
    }
}

#[inline]
fn ddy(u: &Field, ix: usize, iy: usize, comp: usize, h: f64) -> f64 {
    let n = u.sites_y() - 1;
    if iy == 0 {
        (-3.0 * u.at(ix, 0, comp) + 4.0 * u.at(ix, 1, comp) - u.at(ix, 2, comp)) / (2.0 * h)
    } else if iy == n {
        (3.0 * u.at(ix, n, comp) - 4.0 * u.at(ix, n - 1, comp) + u.at(ix, n - 2, comp)) / (2.0 * h)
    } else {
        (u.at(ix, iy + 1, comp) - u.at(ix, iy - 1, comp)) / (2.0 * h)
    }
}

/// Gradient of a node field. Scalar input gives the 2-vector (d/dx, d/dy);
/// vector input gives the tensor with components `(grad v)_ij = d v_i / d x_j`
/// stored `[dv1/dx, dv1/dy, dv2/dx, dv2/dy]`.
pub fn discrete_gradient(u: &Field) -> Result<Field> {
    require_node_scalar_or_vector(u)?;
    let h = u.grid().h();
    let out_rank = match u.rank() {
        Rank::Scalar => Rank::Vector2,
        Rank::Vector2 => Rank::Tensor2x2,
        Rank::Tensor2x2 => unreachable!(),
    };
    let mut out = Field::zeros(*u.grid(), out_rank, Centering::Node);
    let nc_in = u.components();
    for iy in 0..u.sites_y() {
        for ix in 0..u.sites_x() {
            let s = u.site_index(ix, iy);
            for c in 0..nc_in {
                let gx = ddx(u, ix, iy, c, h);
                let gy = ddy(u, ix, iy, c, h);
                out.data[s * 2 * nc_in + 2 * c] = gx;
                out.data[s * 2 * nc_in + 2 * c + 1] = gy;
            }
        }
    }
    Ok(out)
}

/// Pointwise symmetric/skew split of a tensor field; `sym + skew = G`.
pub fn sym_skew_split(g: &Field) -> Result<(Field, Field)> {
    if g.rank() != Rank::Tensor2x2 {
        return Err(Error::RankMismatch {
            expected: "tensor2x2",
            got: g.rank().name(),
        });
    }
    let mut sym = Field::zeros(*g.grid(), Rank::Tensor2x2, g.centering());
    let mut skew = Field::zeros(*g.grid(), Rank::Tensor2x2, g.centering());
    for s in 0..g.site_count() {
        let a = g.get(s, 0);
        let b = g.get(s, 1);
        let c = g.get(s, 2);
        let d = g.get(s, 3);
        let off = 0.5 * (b + c);
        let rot = 0.5 * (b - c);
        sym.set(s, 0, a);
        sym.set(s, 1, off);
        sym.set(s, 2, off);
        sym.set(s, 3, d);
        skew.set(s, 1, rot);
        skew.set(s, 2, -rot);
    }
    Ok((sym, skew))
}

/// Divergence of a node vector field: trace of [`discrete_gradient`].
pub fn discrete_divergence(v: &Field) -> Result<Field> {
    if v.rank() != Rank::Vector2 {
        return Err(Error::RankMismatch {
            expected: "vector2",
            got: v.rank().name(),
        });
    }
    require_node_scalar_or_vector(v)?;
    let h = v.grid().h();
    let mut out = Field::zeros(*v.grid(), Rank::Scalar, Centering::Node);
    for iy in 0..v.sites_y() {
        for ix in 0..v.sites_x() {
            let s = v.site_index(ix, iy);
            out.data[s] = ddx(v, ix, iy, 0, h) + ddy(v, ix, iy, 1, h);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::stream_rng;
    use rand::Rng;

    #[test]
    fn square_cells_enforced() {
        assert!(Grid::new((0.0, 1.0), (0.0, 2.0), 4, 4).is_err());
        assert!(Grid::new((0.0, 1.0), (0.0, 2.0), 4, 8).is_ok());
        assert!(Grid::new((0.0, 1.0), (0.0, 1.0), 1, 1).is_err());
    }

    #[test]
    fn gradient_zero_field() {
        let g = Grid::unit(8);
        let u = Field::zeros(g, Rank::Scalar, Centering::Node);
        let du = discrete_gradient(&u).unwrap();
        assert_eq!(du.max_abs(), 0.0);
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = Grid::unit(8);
        let u = Field::scalar_from_fn(g, Centering::Node, |x, y| 3.0 * x - 2.0 * y);
        let du = discrete_gradient(&u).unwrap();
        for s in 0..du.site_count() {
            assert!((du.get(s, 0) - 3.0).abs() < 1e-13);
            assert!((du.get(s, 1) + 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_exact_on_quadratic_interior() {
        // central difference is exact on x^2 at interior nodes: h = 0.1
        let g = Grid::new((0.0, 1.0), (0.0, 1.0), 10, 10).unwrap();
        let u = Field::scalar_from_fn(g, Centering::Node, |x, _| x * x);
        let du = discrete_gradient(&u).unwrap();
        for iy in 0..u.sites_y() {
            for ix in 1..u.sites_x() - 1 {
                let (x, _) = u.site_pos(ix, iy);
                let s = u.site_index(ix, iy);
                assert!(
                    (du.get(s, 0) - 2.0 * x).abs() < 1e-13,
                    "dx at {x}: {}",
                    du.get(s, 0)
                );
            }
        }
    }

    #[test]
    fn gradient_rejects_tensor_input() {
        let g = Grid::unit(4);
        let t = Field::zeros(g, Rank::Tensor2x2, Centering::Node);
        assert!(matches!(
            discrete_gradient(&t),
            Err(Error::RankMismatch { .. })
        ));
    }

    #[test]
    fn gradient_is_linear() {
        let g = Grid::unit(12);
        let mut rng = stream_rng(11, 0);
        let u = Field::from_fn(g, Rank::Scalar, Centering::Node, |_, _, _| {
            rng.random::<f64>() - 0.5
        });
        let mut rng = stream_rng(11, 1);
        let w = Field::from_fn(g, Rank::Scalar, Centering::Node, |_, _, _| {
            rng.random::<f64>() - 0.5
        });
        let (a, b) = (1.7, -0.3);
        let mut combo = u.scaled(a);
        combo.axpy(b, &w).unwrap();
        let lhs = discrete_gradient(&combo).unwrap();
        let mut rhs = discrete_gradient(&u).unwrap().scaled(a);
        rhs.axpy(b, &discrete_gradient(&w).unwrap()).unwrap();
        let mut diff = lhs.clone();
        diff.axpy(-1.0, &rhs).unwrap();
        assert!(diff.max_abs() <= 1e-13 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn divergence_of_affine_fields() {
        let g = Grid::unit(6);
        let v1 = Field::from_fn(g, Rank::Vector2, Centering::Node, |x, y, c| {
            if c == 0 {
                x
            } else {
                -y
            }
        });
        assert!(discrete_divergence(&v1).unwrap().max_abs() < 1e-13);
        let v2 = Field::from_fn(
            g,
            Rank::Vector2,
            Centering::Node,
            |x, y, c| if c == 0 { x } else { y },
        );
        let d = discrete_divergence(&v2).unwrap();
        for s in 0..d.site_count() {
            assert!((d.get(s, 0) - 2.0).abs() < 1e-12, "{}", d.get(s, 0));
        }
    }

    // stream-function field: v = (d psi/dy, -d psi/dx) is divergence free;
    // the discrete divergence should vanish at O(h^2) under refinement.
    #[test]
    fn divergence_of_stream_function_refines_at_second_order() {
        let psi = |x: f64, y: f64| (2.0 * std::f64::consts::PI * x).sin() * (y * y * y - y);
        let psi_y = |x: f64, y: f64| (2.0 * std::f64::consts::PI * x).sin() * (3.0 * y * y - 1.0);
        let psi_x = |x: f64, y: f64| {
            2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).cos() * (y * y * y - y)
        };
        let _ = psi;
        let mut errs = Vec::new();
        for n in [8usize, 16, 32] {
            let g = Grid::unit(n);
            let v = Field::from_fn(g, Rank::Vector2, Centering::Node, |x, y, c| {
                if c == 0 {
                    psi_y(x, y)
                } else {
                    -psi_x(x, y)
                }
            });
            errs.push(discrete_divergence(&v).unwrap().max_abs());
        }
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
        assert!(errs[2] < errs[1] / 3.0, "{errs:?}");
    }

    #[test]
    fn split_identity_and_hand_case() {
        let g = Grid::unit(4);
        let ident = Field::from_fn(g, Rank::Tensor2x2, Centering::Node, |_, _, c| {
            if c == 0 || c == 3 {
                1.0
            } else {
                0.0
            }
        });
        let (s, k) = sym_skew_split(&ident).unwrap();
        assert_eq!(s, ident);
        assert_eq!(k.max_abs(), 0.0);

        let t = Field::from_fn(
            g,
            Rank::Tensor2x2,
            Centering::Node,
            |_, _, c| if c == 1 { 1.0 } else { 0.0 },
        );
        let (s, k) = sym_skew_split(&t).unwrap();
        assert_eq!(s.get(0, 1), 0.5);
        assert_eq!(s.get(0, 2), 0.5);
        assert_eq!(k.get(0, 1), 0.5);
        assert_eq!(k.get(0, 2), -0.5);
    }

    #[test]
    fn split_is_idempotent_projection_pair() {
        let g = Grid::unit(5);
        let mut rng = stream_rng(3, 0);
        let t = Field::from_fn(g, Rank::Tensor2x2, Centering::Node, |_, _, _| {
            rng.random::<f64>() - 0.5
        });
        let (s, k) = sym_skew_split(&t).unwrap();
        let mut re = s.clone();
        re.axpy(1.0, &k).unwrap();
        let mut diff = re;
        diff.axpy(-1.0, &t).unwrap();
        assert!(diff.max_abs() < 1e-15);
        let (ss, sk) = sym_skew_split(&s).unwrap();
        assert_eq!(ss, s);
        assert_eq!(sk.max_abs(), 0.0);
    }

    #[test]
    fn csv_layout() {
        let g = Grid::unit(2);
        let u = Field::scalar_from_fn(g, Centering::Node, |x, y| x + 10.0 * y);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,c0");
        assert_eq!(lines.len(), 1 + 9);
        // row-major by y then x: second line is node (0,0), third is (0.5,0)
        assert!(lines[1].starts_with("0.0000000000000000e0,0.0000000000000000e0"));
        assert!(lines[2].starts_with("5.0000000000000000e-1,0.0000000000000000e0"));
    }
}
