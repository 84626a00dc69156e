use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::Result;
use crate::forward::claim::{grid_index, PathView};
use crate::forward::spec::CoefficientSpec;
use crate::numeric::{item_rng, mean_and_se};

/// Scratch storage for one trajectory.
#[derive(Debug, Clone, Default)]
pub(crate) struct PathBuf {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub a: Vec<f64>,
}

impl PathBuf {
    pub fn view(&self, dt: f64) -> PathView<'_> {
        PathView { dt, w1: &self.w1, w2: &self.w2, s: &self.s, y: &self.y, z: &self.z, a: &self.a }
    }
}

/// Simulates path `index` of experiment `seed` over the first `steps` grid
/// steps. Each step draws `ΔW¹` then `ΔW²` from the path's own stream, so a
/// shorter horizon yields a prefix of a longer one.
pub(crate) fn fill_path(spec: &CoefficientSpec, seed: u64, index: u64, steps: usize, out: &mut PathBuf) {
    let mut rng = item_rng(seed, index);
    let dt = spec.dt;
    let sq = dt.sqrt();
    for v in [&mut out.w1, &mut out.w2, &mut out.s, &mut out.y, &mut out.z, &mut out.a] {
        v.clear();
    }
    out.w1.push(0.0);
    out.w2.push(0.0);
    out.s.push(1.0);
    out.y.push(1.0 / spec.gamma);
    out.z.push(1.0);
    out.a.push(0.0);
    let (mut ls, mut ly, mut lz) = (0.0f64, -spec.gamma.ln(), 0.0f64);
    for k in 0..steps {
        let d1: f64 = sq * rng.sample::<f64, _>(StandardNormal);
        let d2: f64 = sq * rng.sample::<f64, _>(StandardNormal);
        let (lam, del, phi, sig) = (spec.lambda.at(k), spec.delta.at(k), spec.phi.at(k), spec.sigma.at(k));
        ls += (lam * sig - 0.5 * sig * sig) * dt + sig * d1;
        ly += (del * lam - 0.5 * del * del) * dt + del * d1;
        lz += -0.5 * phi * phi * dt + phi * d1;
        let gap = lam + phi - del;
        out.w1.push(out.w1[k] + d1);
        out.w2.push(out.w2[k] + d2);
        out.s.push(ls.exp());
        out.y.push(ly.exp());
        out.z.push(lz.exp());
        out.a.push(out.a[k] + gap * gap * dt);
    }
}

/// Simulated trajectories of `(W¹, W², S, Y, Z, A)` on the full grid.
#[derive(Debug, Clone)]
pub struct PathBundle {
    spec: CoefficientSpec,
    seed: u64,
    paths: Vec<PathBuf>,
}

impl PathBundle {
    pub fn simulate(spec: &CoefficientSpec, n_paths: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if n_paths == 0 {
            return Err(crate::error::MirmError::InvalidInput("need at least one path".into()));
        }
        let paths = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut p = PathBuf::default();
                fill_path(spec, seed, i as u64, spec.n_steps, &mut p);
                p
            })
            .collect();
        Ok(Self { spec: spec.clone(), seed, paths })
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn n_steps(&self) -> usize {
        self.spec.n_steps
    }

    pub fn path(&self, i: usize) -> PathView<'_> {
        self.paths[i].view(self.spec.dt)
    }

    /// `U_t(x) = -Z_t exp(-x / Y_t + A_t / 2)` on every path.
    pub fn u_eval(&self, t: f64, x: f64) -> Result<Vec<f64>> {
        let k = grid_index(t, self.spec.dt, self.spec.n_steps)?;
        Ok(self.paths.iter().map(|p| -p.z[k] * (-x / p.y[k] + 0.5 * p.a[k]).exp()).collect())
    }

    /// Per step `k`: the mean of `Z_{k+1} / Z_k` and its standard error.
    pub fn z_step_means(&self) -> Vec<(f64, f64)> {
        (0..self.spec.n_steps)
            .map(|k| {
                let r: Vec<f64> = self.paths.iter().map(|p| p.z[k + 1] / p.z[k]).collect();
                mean_and_se(&r)
            })
            .collect()
    }

    /// Whether `A` is nondecreasing along every path.
    pub fn a_is_monotone(&self) -> bool {
        self.paths.iter().all(|p| p.a.windows(2).all(|w| w[1] >= w[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::spec::Coefficient;

    #[test]
    fn plain_market_has_constant_benchmark_and_density() {
        let spec = CoefficientSpec::constant(2.0, 0.2, 0.3, 10, 0.1);
        let b = PathBundle::simulate(&spec, 50, 1).unwrap();
        for i in 0..50 {
            let p = b.path(i);
            assert!(p.z.iter().all(|&z| z == 1.0));
            assert!(p.y.iter().all(|&y| (y - 0.5).abs() < 1e-15));
            assert!((p.a[10] - 0.04).abs() < 1e-15);
        }
    }

    #[test]
    fn utility_at_zero_is_exponential() {
        let mut spec = CoefficientSpec::constant(1.5, 0.2, 0.3, 4, 0.25);
        spec.delta = Coefficient::Scalar(0.1);
        spec.phi = Coefficient::Scalar(-0.2);
        let b = PathBundle::simulate(&spec, 20, 4).unwrap();
        for x in [-1.0, 0.0, 2.0] {
            for u in b.u_eval(0.0, x).unwrap() {
                assert!((u + (-1.5 * x).exp()).abs() < 1e-14);
            }
        }
        assert!(b.u_eval(0.3, 0.0).is_err());
    }

    #[test]
    fn utility_is_increasing_and_concave() {
        let mut spec = CoefficientSpec::constant(1.0, 0.3, 0.2, 8, 0.125);
        spec.delta = Coefficient::Scalar(0.2);
        spec.phi = Coefficient::Scalar(0.1);
        let b = PathBundle::simulate(&spec, 100, 9).unwrap();
        let xs: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let us: Vec<Vec<f64>> = xs.iter().map(|&x| b.u_eval(1.0, x).unwrap()).collect();
        #[allow(clippy::needless_range_loop)]
        for p in 0..100 {
            for k in 1..xs.len() - 1 {
                assert!(us[k][p] > us[k - 1][p]);
                assert!(us[k][p] > 0.5 * (us[k - 1][p] + us[k + 1][p]));
            }
            assert!(us[40][p] < 0.0);
        }
    }

    #[test]
    fn density_is_a_martingale_step_by_step() {
        let mut spec = CoefficientSpec::constant(1.0, 0.2, 0.2, 20, 0.05);
        spec.phi = Coefficient::Scalar(0.4);
        let b = PathBundle::simulate(&spec, 20_000, 77).unwrap();
        for (m, se) in b.z_step_means() {
            assert!((m - 1.0).abs() <= 4.0 * se, "{m} ± {se}");
        }
        assert!(b.a_is_monotone());
    }

    #[test]
    fn matched_benchmark_removes_a() {
        let mut spec = CoefficientSpec::constant(1.0, 0.25, 0.2, 10, 0.1);
        spec.delta = Coefficient::Scalar(0.5);
        spec.phi = Coefficient::Scalar(0.25);
        let b = PathBundle::simulate(&spec, 10, 2).unwrap();
        assert!((0..10).all(|i| b.path(i).a.iter().all(|&a| a == 0.0)));
    }

    #[test]
    fn prefixes_agree_across_horizons() {
        let spec = CoefficientSpec::constant(1.0, 0.2, 0.2, 20, 0.05);
        let (mut a, mut b) = (PathBuf::default(), PathBuf::default());
        fill_path(&spec, 3, 17, 10, &mut a);
        fill_path(&spec, 3, 17, 20, &mut b);
        assert_eq!(a.s[..], b.s[..11]);
        assert_eq!(a.w2[..], b.w2[..11]);
    }

    #[test]
    fn simulation_is_reproducible() {
        let spec = CoefficientSpec::constant(1.0, 0.2, 0.2, 5, 0.2);
        let a = PathBundle::simulate(&spec, 30, 5).unwrap();
        let b = PathBundle::simulate(&spec, 30, 5).unwrap();
        for i in 0..30 {
            assert_eq!(a.path(i).s, b.path(i).s);
        }
    }
}
