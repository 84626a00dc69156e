use crate::error::{MirmError, Result};
use crate::pde::spec::Grid1D;

/// Coefficients of `u_τ = ½u_yy + β u_y + κ u + s` on one time level.
#[derive(Debug, Clone)]
pub(crate) struct Coeffs {
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub src: Vec<f64>,
}

impl Coeffs {
    pub fn zeros(n: usize) -> Self {
        Self { beta: vec![0.0; n], kappa: vec![0.0; n], src: vec![0.0; n] }
    }

    fn midpoint(a: &Coeffs, b: &Coeffs) -> Coeffs {
        let mid = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect();
        Coeffs { beta: mid(&a.beta, &b.beta), kappa: mid(&a.kappa, &b.kappa), src: mid(&a.src, &b.src) }
    }

    /// Sub-, main and super-diagonal of the discrete operator at row `j`.
    fn stencil(&self, j: usize, dy: f64) -> (f64, f64, f64) {
        let diff = 0.5 / (dy * dy);
        let adv = self.beta[j] / (2.0 * dy);
        (diff - adv, -2.0 * diff + self.kappa[j], diff + adv)
    }
}

/// Solves a tridiagonal system in place; `rhs` receives the solution.
pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    if d.abs() < 1e-300 {
        return Err(MirmError::Structural("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / d;
    rhs[0] /= d;
    for i in 1..n {
        d = diag[i] - lower[i] * c[i - 1];
        if d.abs() < 1e-300 || !d.is_finite() {
            return Err(MirmError::Structural("singular tridiagonal system".into()));
        }
        c[i] = upper[i] / d;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// One θ-step of length `dt` from `u` (coefficients `old`) to the next level
/// (coefficients `new`), with `u_yy = 0` at both ends.
pub(crate) fn theta_step(
    grid: &Grid1D,
    u: &[f64],
    old: &Coeffs,
    new: &Coeffs,
    dt: f64,
    theta: f64,
) -> Result<Vec<f64>> {
    let n = grid.n_y();
    let h = grid.dy;
    let m = n - 2;
    let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for r in 0..m {
        let j = r + 1;
        let (a, b, c) = old.stencil(j, h);
        let explicit = a * u[j - 1] + b * u[j] + c * u[j + 1];
        rhs[r] = u[j] + (1.0 - theta) * dt * explicit + dt * (theta * new.src[j] + (1.0 - theta) * old.src[j]);
        let (a, b, c) = new.stencil(j, h);
        lo[r] = -theta * dt * a;
        di[r] = 1.0 - theta * dt * b;
        up[r] = -theta * dt * c;
    }
    if m == 1 {
        let d = lo[0] + di[0] + up[0];
        if d.abs() < 1e-300 {
            return Err(MirmError::Structural("singular tridiagonal system".into()));
        }
        let v = rhs[0] / d;
        return Ok(vec![v; 3]);
    }
    di[0] += 2.0 * lo[0];
    up[0] -= lo[0];
    di[m - 1] += 2.0 * up[m - 1];
    lo[m - 1] -= up[m - 1];
    thomas(&lo, &di, &up, &mut rhs)?;
    let mut out = Vec::with_capacity(n);
    out.push(2.0 * rhs[0] - rhs[1]);
    out.extend_from_slice(&rhs);
    out.push(2.0 * rhs[m - 1] - rhs[m - 2]);
    Ok(out)
}

/// A θ-step, or two implicit half-steps when `rannacher` is set.
pub(crate) fn step(
    grid: &Grid1D,
    u: &[f64],
    old: &Coeffs,
    new: &Coeffs,
    theta: f64,
    rannacher: bool,
) -> Result<Vec<f64>> {
    if rannacher {
        let mid = Coeffs::midpoint(old, new);
        let half = theta_step(grid, u, old, &mid, 0.5 * grid.dt, 1.0)?;
        theta_step(grid, &half, &mid, new, 0.5 * grid.dt, 1.0)
    } else {
        theta_step(grid, u, old, new, grid.dt, theta)
    }
}

/// Central differences in `y`, second-order one-sided at the ends.
pub(crate) fn derivative(u: &[f64], dy: f64) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    for j in 1..n - 1 {
        d[j] = (u[j + 1] - u[j - 1]) / (2.0 * dy);
    }
    if n >= 3 {
        d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dy);
        d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dy);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_a_known_system() {
        let (lo, di, up) = ([0.0, 1.0, 1.0], [4.0, 4.0, 4.0], [1.0, 1.0, 0.0]);
        let x = [1.0, -2.0, 3.0];
        let mut b: Vec<f64> = (0..3)
            .map(|i| di[i] * x[i] + if i > 0 { lo[i] * x[i - 1] } else { 0.0 } + if i < 2 { up[i] * x[i + 1] } else { 0.0 })
            .collect();
        thomas(&lo, &di, &up, &mut b).unwrap();
        for i in 0..3 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
        let mut z = vec![1.0];
        assert!(thomas(&[0.0], &[0.0], &[0.0], &mut z).is_err());
    }

    #[test]
    fn affine_data_is_preserved_by_pure_diffusion() {
        let g = Grid1D::new(2.0, 21, 10);
        let u: Vec<f64> = g.y.iter().map(|y| 3.0 * y - 1.0).collect();
        let c = Coeffs::zeros(21);
        let v = step(&g, &u, &c, &c, 0.5, false).unwrap();
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = step(&g, &u, &c, &c, 0.5, true).unwrap();
        assert!(u.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn heat_kernel_spreads_a_gaussian() {
        let g = Grid1D::new(10.0, 401, 400);
        let mut u: Vec<f64> = g.y.iter().map(|y| (-0.5 * y * y).exp()).collect();
        let c = Coeffs::zeros(401);
        for _ in 0..400 {
            u = step(&g, &u, &c, &c, 0.5, false).unwrap();
        }
        for (v, y) in u.iter().zip(&g.y) {
            let exact = (-0.25 * y * y).exp() / 2f64.sqrt();
            assert!((v - exact).abs() < 1e-4, "{y} {v} {exact}");
        }
    }

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let y: Vec<f64> = (0..11).map(|j| j as f64 * 0.1).collect();
        let u: Vec<f64> = y.iter().map(|v| v * v).collect();
        let d = derivative(&u, 0.1);
        for (a, b) in y.iter().zip(&d) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }
}
