//! Temporal gauge on a discretized collar `(−ε, ε) × N`.
//!
//! A `u(n)`-valued connection `ω₀ dx + Σ ωᵢ dyᵢ` is sampled on a uniform `x` grid through 0
//! and a regular lattice on `N`. Solving `∂ₓ g = −ω₀ g`, `g(0, y) = 1` and transforming by `g`
//! kills `ω₀`; for a flat input the tangential parts become `x`-independent.

use crate::numlin::{CMatrix, C64};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sample at x-index {x}, site {site} is not skew-Hermitian (defect {defect:.3e})")]
    NotSkewHermitian { x: usize, site: usize, defect: f64 },
    #[error("unitarity drift {drift:.3e} exceeds {limit:.1e}; reduce the step")]
    StepTooLarge { drift: f64, limit: f64 },
    #[error("input is not certified flat (curvature {curvature:.3e} above {tol:.1e})")]
    NotFlatInput { curvature: f64, tol: f64 },
}

/// Uniform samples `x_j = (j − J) h`, `j = 0..=2J`, times a regular lattice on `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollarGrid {
    pub half_steps: usize,
    pub h: f64,
    /// Points per tangential axis; empty when `N` is a point.
    pub y_shape: Vec<usize>,
    pub y_step: f64,
}

impl CollarGrid {
    pub fn new(half_steps: usize, h: f64, y_shape: Vec<usize>, y_step: f64) -> Result<Self, GaugeError> {
        if 2 * half_steps + 1 < 5 || h <= 0.0 || !h.is_finite() {
            return Err(GaugeError::ShapeMismatch(format!("need at least 5 positive-step x samples, got {} at h = {h}", 2 * half_steps + 1)));
        }
        if y_shape.iter().any(|&n| n < 5) || (!y_shape.is_empty() && !(y_step > 0.0 && y_step.is_finite())) {
            return Err(GaugeError::ShapeMismatch(format!("tangential axes need at least 5 points and a positive step, got {y_shape:?}")));
        }
        Ok(Self { half_steps, h, y_shape, y_step })
    }

    pub fn nx(&self) -> usize {
        2 * self.half_steps + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        (j as f64 - self.half_steps as f64) * self.h
    }

    pub fn sites(&self) -> usize {
        self.y_shape.iter().product()
    }

    pub fn directions(&self) -> usize {
        self.y_shape.len()
    }

    /// Lattice multi-index of a flat site index, first axis slowest.
    pub fn site_index(&self, site: usize) -> Vec<usize> {
        let mut rest = site;
        let mut idx = vec![0; self.y_shape.len()];
        for (a, &n) in self.y_shape.iter().enumerate().rev() {
            idx[a] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn y(&self, site: usize) -> Vec<f64> {
        self.site_index(site).iter().map(|&i| i as f64 * self.y_step).collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.y_shape[axis + 1..].iter().product()
    }
}

/// Samples of `ω₀` and the `ωᵢ` on a collar grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CollarConnection {
    grid: CollarGrid,
    rank: usize,
    /// Indexed by `x_index * sites + site`.
    omega0: Vec<CMatrix>,
    /// Indexed by `(x_index * sites + site) * directions + direction`.
    omega_tan: Vec<CMatrix>,
}

fn skew_defect(m: &CMatrix) -> f64 {
    (m + m.adjoint()).norm()
}

impl CollarConnection {
    /// Validates shapes and skew-Hermitian samples within `tol`.
    pub fn new(grid: CollarGrid, rank: usize, omega0: Vec<CMatrix>, omega_tan: Vec<CMatrix>, tol: f64) -> Result<Self, GaugeError> {
        let points = grid.nx() * grid.sites();
        if omega0.len() != points || omega_tan.len() != points * grid.directions() {
            return Err(GaugeError::ShapeMismatch(format!(
                "expected {points} normal and {} tangential samples, got {} and {}",
                points * grid.directions(),
                omega0.len(),
                omega_tan.len()
            )));
        }
        if let Some(m) = omega0.iter().chain(&omega_tan).find(|m| m.shape() != (rank, rank)) {
            return Err(GaugeError::ShapeMismatch(format!("sample of shape {:?} in a rank-{rank} connection", m.shape())));
        }
        let conn = Self { grid, rank, omega0, omega_tan };
        for j in 0..conn.grid.nx() {
            for s in 0..conn.grid.sites() {
                let mut defect = skew_defect(conn.omega0(j, s));
                for i in 0..conn.grid.directions() {
                    defect = defect.max(skew_defect(conn.omega_tan(j, s, i)));
                }
                if defect > tol {
                    return Err(GaugeError::NotSkewHermitian { x: j, site: s, defect });
                }
            }
        }
        Ok(conn)
    }

    /// Samples `f0(x, y)` and `ft(x, y, i)` on the grid.
    pub fn from_fn(
        grid: CollarGrid,
        rank: usize,
        f0: impl Fn(f64, &[f64]) -> CMatrix,
        ft: impl Fn(f64, &[f64], usize) -> CMatrix,
        tol: f64,
    ) -> Result<Self, GaugeError> {
        let (nx, sites, dirs) = (grid.nx(), grid.sites(), grid.directions());
        let mut omega0 = Vec::with_capacity(nx * sites);
        let mut omega_tan = Vec::with_capacity(nx * sites * dirs);
        for j in 0..nx {
            let x = grid.x(j);
            for s in 0..sites {
                let y = grid.y(s);
                omega0.push(f0(x, &y));
                omega_tan.extend((0..dirs).map(|i| ft(x, &y, i)));
            }
        }
        Self::new(grid, rank, omega0, omega_tan, tol)
    }

    pub fn grid(&self) -> &CollarGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn omega0(&self, j: usize, site: usize) -> &CMatrix {
        &self.omega0[j * self.grid.sites() + site]
    }

    pub fn omega_tan(&self, j: usize, site: usize, dir: usize) -> &CMatrix {
        &self.omega_tan[(j * self.grid.sites() + site) * self.grid.directions() + dir]
    }

    /// Largest `‖ω₀‖` over the grid.
    pub fn max_normal(&self) -> f64 {
        self.omega0.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

/// Gauge transformation samples, `g(0, y) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeField {
    grid: CollarGrid,
    rank: usize,
    /// Indexed by `x_index * sites + site`.
    values: Vec<CMatrix>,
    /// Largest `‖g* g − 1‖`.
    pub drift: f64,
}

impl GaugeField {
    pub fn new(grid: CollarGrid, rank: usize, values: Vec<CMatrix>) -> Result<Self, GaugeError> {
        if values.len() != grid.nx() * grid.sites() || values.iter().any(|g| g.shape() != (rank, rank)) {
            return Err(GaugeError::ShapeMismatch("gauge samples do not match the grid".into()));
        }
        let drift = unitarity_drift(&values, rank);
        Ok(Self { grid, rank, values, drift })
    }

    pub fn at(&self, j: usize, site: usize) -> &CMatrix {
        &self.values[j * self.grid.sites() + site]
    }

    pub fn grid(&self) -> &CollarGrid {
        &self.grid
    }
}

fn unitarity_drift(values: &[CMatrix], rank: usize) -> f64 {
    let id = CMatrix::identity(rank, rank);
    values.iter().map(|g| (g.adjoint() * g - &id).norm()).fold(0.0, f64::max)
}

/// Default bound on unitarity drift before [`GaugeError::StepTooLarge`].
pub const MAX_DRIFT: f64 = 1e-6;

/// Cubic Lagrange value at local coordinate `t` (in steps) from four consecutive samples at 0..3.
fn lagrange4(samples: [&CMatrix; 4], t: f64) -> CMatrix {
    let nodes = [0.0, 1.0, 2.0, 3.0];
    let mut out = CMatrix::zeros(samples[0].nrows(), samples[0].ncols());
    for (i, s) in samples.iter().enumerate() {
        let mut w = 1.0;
        for (k, &node) in nodes.iter().enumerate() {
            if k != i {
                w *= (t - node) / (nodes[i] - node);
            }
        }
        out += *s * C64::from(w);
    }
    out
}

/// `ω₀` at the midpoint between samples `j` and `j + 1`.
fn midpoint(column: &[&CMatrix], j: usize) -> CMatrix {
    let start = j.saturating_sub(1).min(column.len() - 4);
    let t = j as f64 + 0.5 - start as f64;
    lagrange4([column[start], column[start + 1], column[start + 2], column[start + 3]], t)
}

/// Fourth-order derivative of equally spaced samples, one-sided near the ends.
fn derivative(f: &[CMatrix], step: f64) -> Vec<CMatrix> {
    let n = f.len();
    let w = C64::from(1.0 / (12.0 * step));
    let comb = |idx: [usize; 5], coef: [f64; 5]| -> CMatrix {
        let mut out = CMatrix::zeros(f[0].nrows(), f[0].ncols());
        for (i, c) in idx.iter().zip(coef) {
            out += &f[*i] * C64::from(c);
        }
        out * w
    };
    (0..n)
        .map(|j| match j {
            0 => comb([0, 1, 2, 3, 4], [-25.0, 48.0, -36.0, 16.0, -3.0]),
            1 => comb([0, 1, 2, 3, 4], [-3.0, -10.0, 18.0, -6.0, 1.0]),
            _ if j == n - 2 => comb([n - 5, n - 4, n - 3, n - 2, n - 1], [-1.0, 6.0, -18.0, 10.0, 3.0]),
            _ if j == n - 1 => comb([n - 5, n - 4, n - 3, n - 2, n - 1], [3.0, -16.0, 36.0, -48.0, 25.0]),
            _ => comb([j - 2, j - 1, j, j + 1, j + 2], [1.0, -8.0, 0.0, 8.0, -1.0]),
        })
        .collect()
}

/// RK4 for `∂ₓ g = −ω₀ g` outward from `x = 0` along one site's column.
fn integrate_column(column: &[&CMatrix], h: f64, center: usize, rank: usize) -> Vec<CMatrix> {
    let n = column.len();
    let mut g = vec![CMatrix::zeros(rank, rank); n];
    g[center] = CMatrix::identity(rank, rank);
    let rhs = |w: &CMatrix, y: &CMatrix| -(w * y);
    let step = |y: &CMatrix, w0: &CMatrix, wm: &CMatrix, w1: &CMatrix, dx: f64| -> CMatrix {
        let dx_c = C64::from(dx);
        let half = C64::from(dx / 2.0);
        let k1 = rhs(w0, y);
        let k2 = rhs(wm, &(y + &k1 * half));
        let k3 = rhs(wm, &(y + &k2 * half));
        let k4 = rhs(w1, &(y + &k3 * dx_c));
        y + (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * (dx_c / C64::from(6.0))
    };
    for j in center..n - 1 {
        let wm = midpoint(column, j);
        g[j + 1] = step(&g[j], column[j], &wm, column[j + 1], h);
    }
    for j in (1..=center).rev() {
        let wm = midpoint(column, j - 1);
        g[j - 1] = step(&g[j], column[j], &wm, column[j - 1], -h);
    }
    g
}

/// Solves `∂ₓ g = −ω₀ g`, `g(0, y) = 1` independently at every site.
pub fn solve_temporal_gauge(conn: &CollarConnection) -> Result<GaugeField, GaugeError> {
    solve_temporal_gauge_with(conn, MAX_DRIFT)
}

pub fn solve_temporal_gauge_with(conn: &CollarConnection, max_drift: f64) -> Result<GaugeField, GaugeError> {
    let grid = &conn.grid;
    let (nx, sites) = (grid.nx(), grid.sites());
    let columns: Vec<Vec<CMatrix>> = (0..sites)
        .into_par_iter()
        .map(|s| {
            let column: Vec<&CMatrix> = (0..nx).map(|j| conn.omega0(j, s)).collect();
            integrate_column(&column, grid.h, grid.half_steps, conn.rank)
        })
        .collect();
    let mut values = Vec::with_capacity(nx * sites);
    for j in 0..nx {
        for col in &columns {
            values.push(col[j].clone());
        }
    }
    let field = GaugeField::new(grid.clone(), conn.rank, values)?;
    if field.drift > max_drift {
        return Err(GaugeError::StepTooLarge { drift: field.drift, limit: max_drift });
    }
    Ok(field)
}

/// Derivative along `x` at every site of a field indexed `x_index * sites + site`.
fn x_derivative(values: &[CMatrix], grid: &CollarGrid) -> Vec<CMatrix> {
    let (nx, sites) = (grid.nx(), grid.sites());
    let mut out = vec![CMatrix::zeros(0, 0); values.len()];
    for s in 0..sites {
        let col: Vec<CMatrix> = (0..nx).map(|j| values[j * sites + s].clone()).collect();
        for (j, d) in derivative(&col, grid.h).into_iter().enumerate() {
            out[j * sites + s] = d;
        }
    }
    out
}

/// Derivative along tangential axis `axis` of a field indexed `x_index * sites + site`.
fn y_derivative(values: &[CMatrix], grid: &CollarGrid, axis: usize) -> Vec<CMatrix> {
    let (nx, sites) = (grid.nx(), grid.sites());
    let n = grid.y_shape[axis];
    let stride = grid.stride(axis);
    let mut out = vec![CMatrix::zeros(0, 0); values.len()];
    for j in 0..nx {
        for s in 0..sites {
            if grid.site_index(s)[axis] != 0 {
                continue;
            }
            let line: Vec<usize> = (0..n).map(|i| j * sites + s + i * stride).collect();
            let samples: Vec<CMatrix> = line.iter().map(|&p| values[p].clone()).collect();
            for (p, d) in line.into_iter().zip(derivative(&samples, grid.y_step)) {
                out[p] = d;
            }
        }
    }
    out
}

/// `ω ↦ g⁻¹ ω g + g⁻¹ dg` with derivatives of `g` by fourth-order differences.
pub fn transform_connection(conn: &CollarConnection, g: &GaugeField) -> Result<CollarConnection, GaugeError> {
    if conn.grid != g.grid || conn.rank != g.rank {
        return Err(GaugeError::ShapeMismatch("gauge field and connection live on different grids".into()));
    }
    let grid = &conn.grid;
    let (sites, dirs) = (grid.sites(), grid.directions());
    let inverses: Vec<CMatrix> = g
        .values
        .iter()
        .map(|m| m.clone().try_inverse().ok_or_else(|| GaugeError::ShapeMismatch("singular gauge sample".into())))
        .collect::<Result<_, _>>()?;
    let dx = x_derivative(&g.values, grid);
    let dy: Vec<Vec<CMatrix>> = (0..dirs).map(|a| y_derivative(&g.values, grid, a)).collect();
    let mut omega0 = Vec::with_capacity(g.values.len());
    let mut omega_tan = Vec::with_capacity(g.values.len() * dirs);
    for (p, (gi, gv)) in inverses.iter().zip(&g.values).enumerate() {
        let (j, s) = (p / sites, p % sites);
        omega0.push(gi * conn.omega0(j, s) * gv + gi * &dx[p]);
        for (a, d) in dy.iter().enumerate() {
            omega_tan.push(gi * conn.omega_tan(j, s, a) * gv + gi * &d[p]);
        }
    }
    Ok(CollarConnection { grid: grid.clone(), rank: conn.rank, omega0, omega_tan })
}

/// Largest curvature sample `‖∂ω + [ω, ω]‖` over all coordinate planes, by finite differences.
pub fn max_curvature(conn: &CollarConnection) -> f64 {
    let grid = &conn.grid;
    let dirs = grid.directions();
    let tan: Vec<Vec<CMatrix>> = (0..dirs)
        .map(|a| (0..conn.omega0.len()).map(|p| conn.omega_tan[p * dirs + a].clone()).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for (a, field) in tan.iter().enumerate() {
        let dx_a = x_derivative(field, grid);
        let da_0 = y_derivative(&conn.omega0, grid, a);
        for p in 0..conn.omega0.len() {
            let (w0, wa) = (&conn.omega0[p], &field[p]);
            let f = &dx_a[p] - &da_0[p] + w0 * wa - wa * w0;
            worst = worst.max(f.norm());
        }
        for (b, other) in tan.iter().enumerate().skip(a + 1) {
            let da_b = y_derivative(other, grid, a);
            let db_a = y_derivative(field, grid, b);
            for p in 0..conn.omega0.len() {
                let (wa, wb) = (&field[p], &other[p]);
                let f = &da_b[p] - &db_a[p] + wa * wb - wb * wa;
                worst = worst.max(f.norm());
            }
        }
    }
    worst
}

/// Caller-supplied evidence that an input connection is flat.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatnessCertificate {
    pub max_curvature: f64,
    pub tol: f64,
}

impl FlatnessCertificate {
    /// Certificate from finite-difference curvature samples of `conn`.
    pub fn sample(conn: &CollarConnection, tol: f64) -> Self {
        Self { max_curvature: max_curvature(conn), tol }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TemporalReport {
    pub h: f64,
    pub max_normal: f64,
    /// Largest `‖∂ₓ ωᵢ‖`.
    pub max_x_variation: f64,
    /// `scale · h²`.
    pub threshold: f64,
    pub pass: bool,
}

/// Checks `ω₀ ≡ 0` and `∂ₓ ωᵢ ≡ 0` on a transformed connection, up to `scale · h²`.
pub fn verify_temporal(conn_g: &CollarConnection, flatness: &FlatnessCertificate, scale: f64) -> Result<TemporalReport, GaugeError> {
    // Negated so that NaN curvature is rejected.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(flatness.max_curvature <= flatness.tol) {
        return Err(GaugeError::NotFlatInput { curvature: flatness.max_curvature, tol: flatness.tol });
    }
    let grid = &conn_g.grid;
    let dirs = grid.directions();
    let mut variation: f64 = 0.0;
    for a in 0..dirs {
        let field: Vec<CMatrix> = (0..conn_g.omega0.len()).map(|p| conn_g.omega_tan[p * dirs + a].clone()).collect();
        variation = variation.max(x_derivative(&field, grid).iter().map(|m| m.norm()).fold(0.0, f64::max));
    }
    let max_normal = conn_g.max_normal();
    let threshold = scale * grid.h * grid.h;
    Ok(TemporalReport { h: grid.h, max_normal, max_x_variation: variation, threshold, pass: max_normal <= threshold && variation <= threshold })
}

/// `exp(t M)` for a square matrix.
pub fn expm(m: &CMatrix, t: f64) -> CMatrix {
    (m * C64::from(t)).exp()
}

/// A real scalar profile `a · sin(k·(x, y) + φ)` with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Wave {
    pub amplitude: f64,
    /// Wave numbers for `x` then each tangential axis.
    pub wave_numbers: Vec<f64>,
    pub phase: f64,
}

impl Wave {
    fn arg(&self, x: f64, y: &[f64]) -> f64 {
        self.wave_numbers[0] * x + y.iter().zip(&self.wave_numbers[1..]).map(|(a, b)| a * b).sum::<f64>() + self.phase
    }

    pub fn value(&self, x: f64, y: &[f64]) -> f64 {
        self.amplitude * self.arg(x, y).sin()
    }

    /// Derivative along coordinate `c` (0 is `x`).
    pub fn partial(&self, x: f64, y: &[f64], c: usize) -> f64 {
        self.amplitude * self.wave_numbers[c] * self.arg(x, y).cos()
    }
}

/// `u = Π_j exp(φ_j M_j)` and `u⁻¹ ∂_c u`, computed analytically.
pub fn product_gauge(factors: &[(Wave, CMatrix)], x: f64, y: &[f64], c: usize) -> (CMatrix, CMatrix) {
    let n = factors.first().map_or(0, |f| f.1.nrows());
    let exps: Vec<CMatrix> = factors.iter().map(|(w, m)| expm(m, w.value(x, y))).collect();
    let mut u = CMatrix::identity(n, n);
    for e in &exps {
        u *= e;
    }
    // u⁻¹ ∂u = Σ_j T_j⁻¹ (∂φ_j M_j) T_j with T_j the product of the factors after j
    let mut log_deriv = CMatrix::zeros(n, n);
    let mut tail = CMatrix::identity(n, n);
    for (j, (w, m)) in factors.iter().enumerate().rev() {
        let term = m * C64::from(w.partial(x, y, c));
        log_deriv += tail.adjoint() * term * &tail;
        tail = &exps[j] * tail;
    }
    (u, log_deriv)
}

/// Flat connection `u⁻¹ du` of a product of exponentials of skew-Hermitian generators.
pub fn pure_gauge_connection(grid: CollarGrid, factors: &[(Wave, CMatrix)], tol: f64) -> Result<CollarConnection, GaugeError> {
    let rank = factors.first().map_or(0, |f| f.1.nrows());
    CollarConnection::from_fn(
        grid,
        rank,
        |x, y| product_gauge(factors, x, y, 0).1,
        |x, y, i| product_gauge(factors, x, y, i + 1).1,
        tol,
    )
}
