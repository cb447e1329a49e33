//! Discrete operators `L = kappa * Laplacian` with homogeneous Dirichlet
//! conditions on rectangles.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};

use crate::error::{invalid, Result};

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return invalid(format!("degenerate domain ({x0}, {x1}) x ({y0}, {y1})"));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn lx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn ly(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Capabilities the time steppers need from a spatial discretization.
///
/// States are plain coefficient vectors of length [`dof`](Self::dof); their
/// meaning (nodal values or modal coefficients) is private to the operator.
pub trait SpatialOperator: Send + Sync {
    fn dof(&self) -> usize;

    /// `out = L u`.
    fn apply(&self, u: &[f64], out: &mut [f64]);

    /// Solves `(gamma I - c L) x = r`.
    fn solve_shifted(&self, gamma: f64, c: f64, r: &[f64], out: &mut [f64]);

    /// Discrete inner product approximating the L2(Omega) one.
    fn inner(&self, u: &[f64], v: &[f64]) -> f64;

    fn l2_norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).max(0.0).sqrt()
    }

    /// Values of the field on the operator's physical grid.
    fn to_physical(&self, u: &[f64]) -> Vec<f64>;

    /// Inverse of [`to_physical`](Self::to_physical), projecting when the
    /// representation is modal.
    fn from_physical(&self, values: &[f64]) -> Vec<f64>;

    /// Physical grid points in the order used by [`to_physical`](Self::to_physical).
    fn grid(&self) -> Vec<(f64, f64)>;

    /// Samples an analytic field.
    fn sample(&self, g: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        let vals: Vec<f64> = self.grid().into_iter().map(|(x, y)| g(x, y)).collect();
        self.from_physical(&vals)
    }

    /// `f` applied pointwise to the physical representation of `u`.
    fn apply_pointwise(&self, f: &dyn Fn(f64) -> f64, u: &[f64], out: &mut [f64]) {
        let mut vals = self.to_physical(u);
        for v in vals.iter_mut() {
            *v = f(*v);
        }
        out.copy_from_slice(&self.from_physical(&vals));
    }

    /// Multiplication by a field given on the physical grid, in the
    /// operator's representation.
    fn multiply(&self, weights: &[f64], v: &[f64], out: &mut [f64]) {
        let mut vals = self.to_physical(v);
        for (a, w) in vals.iter_mut().zip(weights) {
            *a *= w;
        }
        out.copy_from_slice(&self.from_physical(&vals));
    }

    /// All eigenvalues of `L`.
    fn eigenvalues(&self) -> Vec<f64>;

    /// True when states are nodal values, so the Jacobian of a pointwise
    /// reaction is diagonal.
    fn is_nodal(&self) -> bool;
}

/// A single eigenmode of `kappa * Laplacian`, reducing the problem to an
/// ODE in its amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMode {
    pub lambda: f64,
    /// L2 norm of the underlying spatial mode.
    pub mode_norm: f64,
}

impl ScalarMode {
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_norm(lambda, 1.0)
    }

    pub fn with_norm(lambda: f64, mode_norm: f64) -> Result<Self> {
        if !(lambda <= 0.0 && lambda.is_finite()) {
            return invalid(format!("scalar eigenvalue must be nonpositive, got {lambda}"));
        }
        if !(mode_norm > 0.0 && mode_norm.is_finite()) {
            return invalid(format!("mode norm must be positive, got {mode_norm}"));
        }
        Ok(ScalarMode { lambda, mode_norm })
    }
}

pub fn build_scalar(lambda: f64) -> Result<ScalarMode> {
    ScalarMode::new(lambda)
}

impl SpatialOperator for ScalarMode {
    fn dof(&self) -> usize {
        1
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * u[0];
    }

    fn solve_shifted(&self, gamma: f64, c: f64, r: &[f64], out: &mut [f64]) {
        out[0] = r[0] / (gamma - c * self.lambda);
    }

    fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mode_norm * self.mode_norm * u[0] * v[0]
    }

    fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn from_physical(&self, values: &[f64]) -> Vec<f64> {
        values.to_vec()
    }

    fn grid(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 0.0)]
    }

    fn eigenvalues(&self) -> Vec<f64> {
        vec![self.lambda]
    }

    fn is_nodal(&self) -> bool {
        true
    }
}

/// Orthonormal sine eigenvectors of the 1D Dirichlet second difference,
/// `s[i][k] = sqrt(2/(n+1)) sin((i+1)(k+1) pi/(n+1))`.
fn sine_matrix(n: usize) -> Array2<f64> {
    let scale = (2.0 / (n as f64 + 1.0)).sqrt();
    Array2::from_shape_fn((n, n), |(i, k)| {
        scale * (((i + 1) * (k + 1)) as f64 * PI / (n as f64 + 1.0)).sin()
    })
}

/// Five-point finite differences on a uniform interior grid, with shifted
/// solves by fast diagonalization.
#[derive(Debug, Clone)]
pub struct Fd2d {
    kappa: f64,
    nx: usize,
    ny: usize,
    domain: Rect,
    hx: f64,
    hy: f64,
    sx: Array2<f64>,
    sy: Array2<f64>,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
}

pub fn build_fd2d(kappa: f64, nx: usize, ny: usize, domain: Rect) -> Result<Fd2d> {
    Fd2d::new(kappa, nx, ny, domain)
}

impl Fd2d {
    pub fn new(kappa: f64, nx: usize, ny: usize, domain: Rect) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return invalid(format!("grid needs at least 2x2 interior points, got {nx}x{ny}"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return invalid(format!("diffusion coefficient must be positive, got {kappa}"));
        }
        let domain = Rect::new(domain.x0, domain.x1, domain.y0, domain.y1)?;
        let hx = domain.lx() / (nx as f64 + 1.0);
        let hy = domain.ly() / (ny as f64 + 1.0);
        let eig = |n: usize, h: f64| -> Vec<f64> {
            (1..=n)
                .map(|k| {
                    let s = (k as f64 * PI / (2.0 * (n as f64 + 1.0))).sin();
                    -4.0 / (h * h) * s * s
                })
                .collect()
        };
        Ok(Fd2d {
            kappa,
            nx,
            ny,
            domain,
            hx,
            hy,
            sx: sine_matrix(nx),
            sy: sine_matrix(ny),
            eig_x: eig(nx, hx),
            eig_y: eig(ny, hy),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn view<'a>(&self, u: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.nx, self.ny), u).expect("state length matches grid")
    }
}

impl SpatialOperator for Fd2d {
    fn dof(&self) -> usize {
        self.nx * self.ny
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let (cx, cy) = (self.kappa / (self.hx * self.hx), self.kappa / (self.hy * self.hy));
        for i in 0..nx {
            for j in 0..ny {
                let c = u[i * ny + j];
                let w = if i > 0 { u[(i - 1) * ny + j] } else { 0.0 };
                let e = if i + 1 < nx { u[(i + 1) * ny + j] } else { 0.0 };
                let s = if j > 0 { u[i * ny + j - 1] } else { 0.0 };
                let n = if j + 1 < ny { u[i * ny + j + 1] } else { 0.0 };
                out[i * ny + j] = cx * (w - 2.0 * c + e) + cy * (s - 2.0 * c + n);
            }
        }
    }

    fn solve_shifted(&self, gamma: f64, c: f64, r: &[f64], out: &mut [f64]) {
        let hat = self.sx.t().dot(&self.view(r)).dot(&self.sy);
        let mut hat = hat;
        for ((k, l), v) in hat.indexed_iter_mut() {
            *v /= gamma - c * self.kappa * (self.eig_x[k] + self.eig_y[l]);
        }
        let x = self.sx.dot(&hat).dot(&self.sy.t());
        for (o, v) in out.iter_mut().zip(x.iter()) {
            *o = *v;
        }
    }

    fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.hx * self.hy * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }

    fn from_physical(&self, values: &[f64]) -> Vec<f64> {
        values.to_vec()
    }

    fn grid(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.dof());
        for i in 1..=self.nx {
            for j in 1..=self.ny {
                pts.push((
                    self.domain.x0 + i as f64 * self.hx,
                    self.domain.y0 + j as f64 * self.hy,
                ));
            }
        }
        pts
    }

    fn apply_pointwise(&self, f: &dyn Fn(f64) -> f64, u: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(u) {
            *o = f(*v);
        }
    }

    fn multiply(&self, weights: &[f64], v: &[f64], out: &mut [f64]) {
        for ((o, a), w) in out.iter_mut().zip(v).zip(weights) {
            *o = a * w;
        }
    }

    fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = Vec::with_capacity(self.dof());
        for &a in &self.eig_x {
            for &b in &self.eig_y {
                ev.push(self.kappa * (a + b));
            }
        }
        ev
    }

    fn is_nodal(&self) -> bool {
        true
    }
}

/// Tensor sine-series Galerkin operator. The state holds the coefficients
/// `c[k][l]` of `sin(k pi (x - x0)/Lx) sin(l pi (y - y0)/Ly)`, `1 <= k <= Kx`,
/// `1 <= l <= Ky`; nonlinear terms are evaluated by collocation on an
/// `Mx x My` interior grid.
#[derive(Debug, Clone)]
pub struct SineSpectral2D {
    kappa: f64,
    kx: usize,
    ky: usize,
    mx: usize,
    my: usize,
    domain: Rect,
    /// synthesis matrices, grid x modes
    syn_x: Array2<f64>,
    syn_y: Array2<f64>,
    /// analysis matrices, modes x grid
    ana_x: Array2<f64>,
    ana_y: Array2<f64>,
    eig: Vec<f64>,
}

pub fn build_sine_spectral(
    kappa: f64,
    kx: usize,
    ky: usize,
    mx: usize,
    my: usize,
    domain: Rect,
) -> Result<SineSpectral2D> {
    SineSpectral2D::new(kappa, kx, ky, mx, my, domain)
}

impl SineSpectral2D {
    pub fn new(
        kappa: f64,
        kx: usize,
        ky: usize,
        mx: usize,
        my: usize,
        domain: Rect,
    ) -> Result<Self> {
        if kx == 0 || ky == 0 {
            return invalid("spectral cutoff must be at least one mode per direction");
        }
        if mx < kx || my < ky {
            return invalid(format!(
                "collocation grid {mx}x{my} cannot resolve {kx}x{ky} modes"
            ));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return invalid(format!("diffusion coefficient must be positive, got {kappa}"));
        }
        let domain = Rect::new(domain.x0, domain.x1, domain.y0, domain.y1)?;
        let syn = |m: usize, k: usize| {
            Array2::from_shape_fn((m, k), |(i, q)| {
                (((i + 1) * (q + 1)) as f64 * PI / (m as f64 + 1.0)).sin()
            })
        };
        let syn_x = syn(mx, kx);
        let syn_y = syn(my, ky);
        let ana_x = syn_x.t().to_owned() * (2.0 / (mx as f64 + 1.0));
        let ana_y = syn_y.t().to_owned() * (2.0 / (my as f64 + 1.0));
        let (lx, ly) = (domain.lx(), domain.ly());
        let mut eig = Vec::with_capacity(kx * ky);
        for k in 1..=kx {
            for l in 1..=ky {
                let (a, b) = (k as f64 / lx, l as f64 / ly);
                eig.push(-kappa * PI * PI * (a * a + b * b));
            }
        }
        Ok(SineSpectral2D { kappa, kx, ky, mx, my, domain, syn_x, syn_y, ana_x, ana_y, eig })
    }

    /// Default collocation size `M = 2K`.
    pub fn with_cutoff(kappa: f64, k: usize, domain: Rect) -> Result<Self> {
        Self::new(kappa, k, k, 2 * k, 2 * k, domain)
    }

    pub fn modes(&self) -> (usize, usize) {
        (self.kx, self.ky)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Evaluates the series at an arbitrary point.
    pub fn evaluate(&self, u: &[f64], x: f64, y: f64) -> f64 {
        let (lx, ly) = (self.domain.lx(), self.domain.ly());
        let sx: Vec<f64> = (1..=self.kx)
            .map(|k| (k as f64 * PI * (x - self.domain.x0) / lx).sin())
            .collect();
        let sy: Vec<f64> = (1..=self.ky)
            .map(|l| (l as f64 * PI * (y - self.domain.y0) / ly).sin())
            .collect();
        let mut acc = 0.0;
        for k in 0..self.kx {
            for l in 0..self.ky {
                acc += u[k * self.ky + l] * sx[k] * sy[l];
            }
        }
        acc
    }
}

impl SpatialOperator for SineSpectral2D {
    fn dof(&self) -> usize {
        self.kx * self.ky
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for ((o, v), e) in out.iter_mut().zip(u).zip(&self.eig) {
            *o = e * v;
        }
    }

    fn solve_shifted(&self, gamma: f64, c: f64, r: &[f64], out: &mut [f64]) {
        for ((o, v), e) in out.iter_mut().zip(r).zip(&self.eig) {
            *o = v / (gamma - c * e);
        }
    }

    fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let w = self.domain.lx() * self.domain.ly() / 4.0;
        w * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        let c = ArrayView2::from_shape((self.kx, self.ky), u).expect("modal length");
        let g = self.syn_x.dot(&c).dot(&self.syn_y.t());
        g.iter().copied().collect()
    }

    fn from_physical(&self, values: &[f64]) -> Vec<f64> {
        let g = ArrayView2::from_shape((self.mx, self.my), values).expect("grid length");
        let c = self.ana_x.dot(&g).dot(&self.ana_y.t());
        c.iter().copied().collect()
    }

    fn grid(&self) -> Vec<(f64, f64)> {
        let hx = self.domain.lx() / (self.mx as f64 + 1.0);
        let hy = self.domain.ly() / (self.my as f64 + 1.0);
        let mut pts = Vec::with_capacity(self.mx * self.my);
        for i in 1..=self.mx {
            for j in 1..=self.my {
                pts.push((self.domain.x0 + i as f64 * hx, self.domain.y0 + j as f64 * hy));
            }
        }
        pts
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.eig.clone()
    }

    fn is_nodal(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const KAPPA: f64 = 1.0 / (2.0 * PI * PI);

    fn mode11(x: f64, y: f64) -> f64 {
        (PI * x).sin() * (PI * y).sin()
    }

    #[test]
    fn scalar_examples() {
        let op = build_scalar(-1.0).unwrap();
        let mut out = [0.0];
        op.solve_shifted(2.0, 1.0, &[3.0], &mut out);
        assert_eq!(out[0], 1.0);
        let zero = build_scalar(0.0).unwrap();
        zero.apply(&[5.0], &mut out);
        assert_eq!(out[0], 0.0);
        assert!(build_scalar(0.5).is_err());
    }

    #[test]
    fn fd_mode_eigenvalue() {
        let n = 31;
        let op = build_fd2d(KAPPA, n, n, Rect::UNIT).unwrap();
        let u = op.sample(&mode11);
        let mut lu = vec![0.0; u.len()];
        op.apply(&u, &mut lu);
        let h = 1.0 / (n as f64 + 1.0);
        let mu = -(4.0 / (h * h)) * (PI * h / 2.0).sin().powi(2) / (PI * PI);
        for (a, b) in lu.iter().zip(&u) {
            assert!((a - mu * b).abs() < 1e-12);
        }
        assert!((mu + 1.0).abs() <= PI * PI * h * h / 12.0 * 1.1);
    }

    #[test]
    fn fd_shifted_solve_roundtrip() {
        let op = build_fd2d(0.3, 7, 5, Rect::new(0.0, 2.0, -1.0, 1.0).unwrap()).unwrap();
        let r: Vec<f64> = (0..op.dof()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let mut x = vec![0.0; r.len()];
        op.solve_shifted(1.7, 0.9, &r, &mut x);
        let mut lx = vec![0.0; r.len()];
        op.apply(&x, &mut lx);
        for i in 0..r.len() {
            assert_relative_eq!(1.7 * x[i] - 0.9 * lx[i], r[i], epsilon = 1e-11);
        }
        op.solve_shifted(4.0, 0.0, &r, &mut x);
        for i in 0..r.len() {
            assert_relative_eq!(x[i], r[i] / 4.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn spectral_examples() {
        let op = SineSpectral2D::with_cutoff(KAPPA, 8, Rect::UNIT).unwrap();
        let u = op.sample(&mode11);
        assert_relative_eq!(u[0], 1.0, epsilon = 1e-13);
        assert!(u[1..].iter().all(|c| c.abs() < 1e-13));
        let mut lu = vec![0.0; u.len()];
        op.apply(&u, &mut lu);
        assert_relative_eq!(lu[0], -1.0, epsilon = 1e-13);
        assert_relative_eq!(op.l2_norm(&u), 0.5, epsilon = 1e-13);
        assert!(SineSpectral2D::new(KAPPA, 8, 8, 4, 8, Rect::UNIT).is_err());
    }

    #[test]
    fn spectral_cube_of_mode() {
        // sin^3 t = (3 sin t - sin 3t) / 4 in each direction
        let op = SineSpectral2D::with_cutoff(KAPPA, 4, Rect::UNIT).unwrap();
        let u = op.sample(&mode11);
        let mut cube = vec![0.0; u.len()];
        op.apply_pointwise(&|v| v * v * v, &u, &mut cube);
        let one_d = [0.75, 0.0, -0.25, 0.0];
        for k in 0..4 {
            for l in 0..4 {
                assert_relative_eq!(cube[k * 4 + l], one_d[k] * one_d[l], epsilon = 1e-13);
            }
        }
    }
}
