//! Reference solutions without a closed form.
//!
//! * Burgers: Cole-Hopf integral evaluated by Gauss-Hermite quadrature.
//! * Allen-Cahn: method of lines with second-order central differences and
//!   Dormand-Prince time stepping, Richardson-extrapolated over two grids and
//!   checked against the next coarser pair.
//! * Reaction-rate inverse problem: tridiagonal finite-difference solve of the
//!   two-point boundary value problem with the exact rate.
//!
//! Space-time fields are stored x-major: value `(ix, it)` sits at `ix * nt + it`.

use std::f64::consts::PI;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::ByteReader;

pub const BURGERS_NU: f64 = 0.01 / PI;
pub const ALLEN_CAHN_D: f64 = 0.001;
pub const GAUSS_HERMITE_NODES: usize = 200;
/// Finest method-of-lines grid (intervals on [-1, 1]).
pub const MOL_INTERVALS: usize = 3200;
pub const MOL_CONVERGENCE_TOL: f64 = 1e-6;

const CACHE_MAGIC: &[u8; 4] = b"GPRF";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("Gauss-Hermite node {index} of {n} did not converge (last Newton step {step:e})")]
    Quadrature { n: usize, index: usize, step: f64 },
    #[error("time integration failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },
    #[error("method-of-lines reference not converged: extrapolated fields differ by {diff:e} (tolerance {tol:e})")]
    NotConverged { diff: f64, tol: f64 },
    #[error("grid {nx}x{nt} is not supported: {reason}")]
    Grid { nx: usize, nt: usize, reason: String },
    #[error("malformed reference cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Tensor grid on `[x0, x1] x [t0, t1]` with `nx` and `nt` equispaced nodes,
/// endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub x: [f64; 2],
    pub t: [f64; 2],
    pub nx: usize,
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn x_at(&self, i: usize) -> f64 {
        lin(self.x, self.nx, i)
    }

    pub fn t_at(&self, j: usize) -> f64 {
        lin(self.t, self.nt, j)
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in storage order, `[x, t]` each.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.nt {
                out.push([self.x_at(i), self.t_at(j)]);
            }
        }
        out
    }
}

fn lin(r: [f64; 2], n: usize, i: usize) -> f64 {
    if n == 1 {
        return r[0];
    }
    if i + 1 == n {
        return r[1];
    }
    r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64
}

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature

/// Nodes and weights of the `n`-point Gauss-Hermite rule for weight `exp(-z^2)`,
/// nodes in decreasing order.
///
/// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix with
/// off-diagonal `sqrt(k / 2)`, weights `sqrt(pi)` times the squared first
/// eigenvector components; each node is then polished with Newton steps on the
/// normalised Hermite recurrence, which also yields the final weight.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>), ReferenceError> {
    assert!(n >= 1, "need at least one node");
    let mut d = vec![0.0; n];
    let mut e: Vec<f64> = (1..=n).map(|k| if k < n { (k as f64 / 2.0).sqrt() } else { 0.0 }).collect();
    let mut z0 = vec![0.0; n];
    z0[0] = 1.0;
    tridiagonal_ql(&mut d, &mut e, &mut z0).map_err(|index| ReferenceError::Quadrature {
        n,
        index,
        step: f64::NAN,
    })?;
    let mut pairs: Vec<(f64, f64)> = d.iter().zip(&z0).map(|(&x, &v)| (x, PI.sqrt() * v * v)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut w: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n.div_ceil(2) {
        let j = n - 1 - i;
        let (mut z, mut wz) = (0.5 * (x[i] - x[j]), 0.5 * (w[i] + w[j]));
        if i == j {
            z = 0.0;
        }
        let (polished, weight, step) = hermite_newton(n, z);
        if (polished - z).abs() > 1e-8 * z.abs().max(1.0) {
            return Err(ReferenceError::Quadrature { n, index: i, step });
        }
        z = polished;
        if weight.is_finite() && weight > 0.0 {
            wz = weight;
        }
        x[i] = z;
        x[j] = -z;
        w[i] = wz;
        w[j] = wz;
    }
    Ok((x, w))
}

/// Newton iterations for a root of the orthonormal Hermite polynomial of
/// degree `n` near `z`; returns (root, weight, last step).
fn hermite_newton(n: usize, mut z: f64) -> (f64, f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let (mut pp, mut step) = (f64::NAN, f64::NAN);
    for _ in 0..8 {
        let (mut p1, mut p2) = (PIM4, 0.0f64);
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        }
        pp = (2.0 * nf).sqrt() * p2;
        let dz = p1 / pp;
        if !dz.is_finite() {
            break;
        }
        z -= dz;
        step = dz.abs();
        if step <= 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    (z, 2.0 / (pp * pp), step)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix
/// (diagonal `d`, off-diagonal `e[i]` between rows `i` and `i + 1`).
/// Eigenvalues replace `d`; `z0` is rotated along, so starting from the first
/// unit vector it ends as the first row of the eigenvector matrix.
/// On failure returns the index whose eigenvalue did not converge.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z0: &mut [f64]) -> Result<(), usize> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(l);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let f = z0[i + 1];
                z0[i + 1] = s * z0[i] + c * f;
                z0[i] = c * z0[i] - s * f;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Burgers solution `u_t + u u_x = nu u_xx` on `[-1, 1]` with `u(x, 0) = -sin(pi x)`
/// and zero boundary values, via the Cole-Hopf representation
/// `u = -int sin(pi (x - eta)) F(x - eta) G(eta) / int F(x - eta) G(eta)` with
/// `F(y) = exp(-cos(pi y) / (2 pi nu))` and heat kernel `G`.
#[derive(Debug, Clone)]
pub struct ColeHopf {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    nu: f64,
}

impl ColeHopf {
    pub fn new(n_nodes: usize) -> Result<Self, ReferenceError> {
        let (nodes, weights) = gauss_hermite(n_nodes)?;
        Ok(ColeHopf {
            nodes,
            weights,
            nu: BURGERS_NU,
        })
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return -(PI * x).sin();
        }
        let c = (4.0 * self.nu * t).sqrt();
        let scale = 1.0 / (2.0 * PI * self.nu);
        let mut lmax = f64::NEG_INFINITY;
        for &z in &self.nodes {
            lmax = lmax.max(-(PI * (x - c * z)).cos() * scale);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            let y = x - c * z;
            let e = w * (-(PI * y).cos() * scale - lmax).exp();
            num += (PI * y).sin() * e;
            den += e;
        }
        -num / den
    }
}

pub fn burgers_field(grid: &SpaceTimeGrid) -> Result<Vec<f64>, ReferenceError> {
    let ch = ColeHopf::new(GAUSS_HERMITE_NODES)?;
    Ok(grid.points().iter().map(|p| ch.eval(p[0], p[1])).collect())
}

// ---------------------------------------------------------------------------
// Allen-Cahn method of lines

/// Method-of-lines solution of `u_t = D u_xx + 5 (u - u^3)` on `[-1, 1]` with
/// `n` intervals, `u(x, 0) = x^2 cos(pi x)`, `u(+-1, t) = -1`, at `times`.
/// Returns one row of `n + 1` nodal values per requested time.
pub fn allen_cahn_mol(n: usize, times: &[f64], tol: f64) -> Result<Vec<Vec<f64>>, ReferenceError> {
    let h = 2.0 / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| -1.0 + h * i as f64).collect();
    let mut u: Vec<f64> = xs.iter().map(|x| x * x * (PI * x).cos()).collect();
    u[0] = -1.0;
    u[n] = -1.0;
    let coef = ALLEN_CAHN_D / (h * h);
    let rhs = move |u: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        out[n] = 0.0;
        for i in 1..n {
            let ui = u[i];
            out[i] = coef * (u[i + 1] - 2.0 * ui + u[i - 1]) + 5.0 * (ui - ui * ui * ui);
        }
    };
    let stiff = 4.0 * coef + 10.0;
    let mut dp = DormandPrince::new(&rhs, &u, tol, 3.0 / stiff);
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        dp.advance(&rhs, &mut u, &mut t, target)?;
        out.push(u.clone());
    }
    Ok(out)
}

struct DormandPrince {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    tol: f64,
    h: f64,
    max_steps: usize,
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl DormandPrince {
    fn new<F: Fn(&[f64], &mut [f64])>(f: &F, y: &[f64], tol: f64, h0: f64) -> Self {
        let mut dp = DormandPrince {
            k: std::array::from_fn(|_| vec![0.0; y.len()]),
            tmp: vec![0.0; y.len()],
            tol,
            h: h0,
            max_steps: 10_000_000,
        };
        f(y, &mut dp.k[0]);
        dp
    }

    fn advance<F>(&mut self, f: &F, y: &mut [f64], t: &mut f64, target: f64) -> Result<(), ReferenceError>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let dim = y.len();
        let mut steps = 0usize;
        while *t < target {
            steps += 1;
            if steps > self.max_steps {
                return Err(ReferenceError::Integrator {
                    t: *t,
                    reason: format!("exceeded {} steps", self.max_steps),
                });
            }
            let clamped = target - *t <= self.h;
            let h = if clamped { target - *t } else { self.h };
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (r, a) in DP_A[s][..s].iter().enumerate() {
                        if *a != 0.0 {
                            acc += h * a * self.k[r][i];
                        }
                    }
                    self.tmp[i] = acc;
                }
                f(&self.tmp, &mut self.k[s]);
            }
            // tmp now holds the fifth-order solution; k[6] is f at it.
            let mut err = 0.0f64;
            for i in 0..dim {
                let mut e = 0.0;
                for (s, c) in DP_E.iter().enumerate() {
                    e += c * self.k[s][i];
                }
                let sc = self.tol * (1.0 + y[i].abs().max(self.tmp[i].abs()));
                err = err.max((h * e).abs() / sc);
            }
            if !err.is_finite() {
                return Err(ReferenceError::Integrator {
                    t: *t,
                    reason: "non-finite error estimate".into(),
                });
            }
            if err <= 1.0 {
                *t = if clamped { target } else { *t + h };
                y.copy_from_slice(&self.tmp);
                let last = self.k[6].clone();
                self.k[0].copy_from_slice(&last);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let next = h * factor;
            if !(clamped && err <= 1.0) {
                self.h = next;
            }
            if self.h < 1e-14 {
                return Err(ReferenceError::Integrator {
                    t: *t,
                    reason: format!("step size underflow ({:e})", self.h),
                });
            }
        }
        Ok(())
    }
}

fn check_mol_grid(grid: &SpaceTimeGrid) -> Result<usize, ReferenceError> {
    let bad = |reason: &str| ReferenceError::Grid {
        nx: grid.nx,
        nt: grid.nt,
        reason: reason.to_string(),
    };
    if grid.x != [-1.0, 1.0] || grid.t[0] != 0.0 || !(grid.t[1] > 0.0) {
        return Err(bad("Allen-Cahn grids span x in [-1, 1] and start at t = 0"));
    }
    if grid.nx < 2 || grid.nt < 1 {
        return Err(bad("need at least two x nodes and one time"));
    }
    let coarse = MOL_INTERVALS / 4;
    if coarse % (grid.nx - 1) != 0 {
        return Err(bad(&format!("nx - 1 must divide {coarse}")));
    }
    Ok(grid.nx - 1)
}

/// Allen-Cahn reference on `grid`: Richardson extrapolation `(4 u_h - u_2h) / 3`
/// of the [`MOL_INTERVALS`] and half-resolution solves, required to agree with
/// the next coarser extrapolation to [`MOL_CONVERGENCE_TOL`].
pub fn allen_cahn_field(grid: &SpaceTimeGrid) -> Result<Vec<f64>, ReferenceError> {
    let cells = check_mol_grid(grid)?;
    let times: Vec<f64> = (0..grid.nt).map(|j| grid.t_at(j)).collect();
    let levels = [MOL_INTERVALS / 4, MOL_INTERVALS / 2, MOL_INTERVALS];
    let mut sampled = Vec::new();
    for &n in &levels {
        let rows = allen_cahn_mol(n, &times, 1e-10)?;
        let stride = n / cells;
        sampled.push(rows.iter().map(|r| (0..grid.nx).map(|i| r[i * stride]).collect::<Vec<_>>()).collect::<Vec<_>>());
    }
    let extrapolate = |fine: &Vec<Vec<f64>>, coarse: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        fine.iter()
            .zip(coarse)
            .map(|(f, c)| f.iter().zip(c).map(|(a, b)| (4.0 * a - b) / 3.0).collect())
            .collect()
    };
    let r_fine = extrapolate(&sampled[2], &sampled[1]);
    let r_coarse = extrapolate(&sampled[1], &sampled[0]);
    let mut diff = 0.0f64;
    for (a, b) in r_fine.iter().flatten().zip(r_coarse.iter().flatten()) {
        diff = diff.max((a - b).abs());
    }
    if !(diff < MOL_CONVERGENCE_TOL) {
        return Err(ReferenceError::NotConverged {
            diff,
            tol: MOL_CONVERGENCE_TOL,
        });
    }
    let mut out = vec![0.0; grid.len()];
    for (j, row) in r_fine.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            out[i * grid.nt + j] = *v;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Two-point boundary value problem

/// Second-order finite-difference solution of `lambda u'' - k(x) u = s(x)` on
/// `[0, 1]` with `u(0) = u(1) = 0` and `n` intervals; returns the `n + 1` nodal values.
pub fn solve_bvp<K, S>(lambda: f64, k: K, s: S, n: usize) -> Vec<f64>
where
    K: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    assert!(n >= 2, "need at least two intervals");
    let h = 1.0 / n as f64;
    let m = n - 1;
    let off = lambda / (h * h);
    let diag: Vec<f64> = (1..n).map(|i| -2.0 * off - k(i as f64 * h)).collect();
    let rhs: Vec<f64> = (1..n).map(|i| s(i as f64 * h)).collect();
    let inner = thomas(&vec![off; m], &diag, &vec![off; m], &rhs);
    let mut u = Vec::with_capacity(n + 1);
    u.push(0.0);
    u.extend(inner);
    u.push(0.0);
    u
}

/// Thomas algorithm for a tridiagonal system (sub-diagonal `a[1..]`, super-diagonal `c[..n-1]`).
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

// ---------------------------------------------------------------------------
// Disk cache

/// Which cached field a file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachedField {
    Burgers = 1,
    AllenCahn = 2,
}

impl CachedField {
    fn tag(self) -> &'static str {
        match self {
            CachedField::Burgers => "burgers",
            CachedField::AllenCahn => "allen-cahn",
        }
    }

    fn compute(self, grid: &SpaceTimeGrid) -> Result<Vec<f64>, ReferenceError> {
        match self {
            CachedField::Burgers => burgers_field(grid),
            CachedField::AllenCahn => allen_cahn_field(grid),
        }
    }
}

pub fn cache_path(dir: &Path, field: CachedField, grid: &SpaceTimeGrid) -> PathBuf {
    dir.join(format!("{}-{}x{}.bin", field.tag(), grid.nx, grid.nt))
}

/// Field on `grid`, loaded from `dir` if a matching file exists, else computed
/// and written. Concurrent callers serialise on an exclusive lock file.
pub fn cached_field(field: CachedField, grid: &SpaceTimeGrid, dir: Option<&Path>) -> Result<Vec<f64>, ReferenceError> {
    let Some(dir) = dir else {
        return field.compute(grid);
    };
    fs::create_dir_all(dir)?;
    let path = cache_path(dir, field, grid);
    let lock = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(path.with_extension("lock"))?;
    lock.lock()?;
    if path.exists() {
        let values = read_cache(&path, field, grid)?;
        lock.unlock()?;
        return Ok(values);
    }
    let values = field.compute(grid)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&encode_cache(field, grid, &values))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    lock.unlock()?;
    Ok(values)
}

/// Byte layout (little-endian): magic `GPRF`, u32 version, u32 field tag,
/// u64 nx, u64 nt, f64 x0, x1, t0, t1, then `nx * nt` f64 values x-major.
pub fn encode_cache(field: CachedField, grid: &SpaceTimeGrid, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(56 + 8 * values.len());
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(field as u32).to_le_bytes());
    out.extend_from_slice(&(grid.nx as u64).to_le_bytes());
    out.extend_from_slice(&(grid.nt as u64).to_le_bytes());
    for v in [grid.x[0], grid.x[1], grid.t[0], grid.t[1]] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_cache(path: &Path, field: CachedField, grid: &SpaceTimeGrid) -> Result<Vec<f64>, ReferenceError> {
    let bytes = fs::read(path)?;
    let bad = |reason: String| ReferenceError::Cache {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = ByteReader::new(&bytes);
    let header = (|| -> Result<_, crate::network::NetworkError> {
        let magic = r.take(4)?.to_vec();
        let version = r.u32()?;
        let tag = r.u32()?;
        let nx = r.u64()? as usize;
        let nt = r.u64()? as usize;
        let bounds = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
        Ok((magic, version, tag, nx, nt, bounds))
    })()
    .map_err(|e| bad(e.to_string()))?;
    let (magic, version, tag, nx, nt, bounds) = header;
    if magic != CACHE_MAGIC || version != CACHE_VERSION {
        return Err(bad("bad magic or version".into()));
    }
    if tag != field as u32 || nx != grid.nx || nt != grid.nt || bounds != [grid.x[0], grid.x[1], grid.t[0], grid.t[1]] {
        return Err(bad("header does not match the requested grid".into()));
    }
    let mut values = Vec::with_capacity(nx * nt);
    for _ in 0..nx * nt {
        values.push(r.f64().map_err(|e| bad(e.to_string()))?);
    }
    if !r.is_done() {
        return Err(bad("trailing bytes".into()));
    }
    Ok(values)
}
