//! Wigner D-matrices, Clebsch-Gordan coefficients, spherical harmonics and
//! quadrature rules on SO(3) and S².
//!
//! Convention: `D^ℓ_{mn}(R) = e^{imα} d^ℓ_{mn}(β) e^{inγ}` for `R = R(α, β, γ)`,
//! the complex conjugate of the usual quantum-mechanics form. Rotations about
//! `ẑ` are then diagonal with entries `e^{imω}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra as na;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rotations::{Rotation, SpherePoint};

/// A `(2ℓ+1)×(2ℓ+1)` irrep matrix indexed by `m, n ∈ [−ℓ, ℓ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DMatrix {
    ell: usize,
    data: na::DMatrix<Complex64>,
}

impl DMatrix {
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn dim(&self) -> usize {
        2 * self.ell + 1
    }

    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        let l = self.ell as i64;
        self.data[((m + l) as usize, (n + l) as usize)]
    }

    /// Row/column `0` is `m = −ℓ`.
    pub fn as_matrix(&self) -> &na::DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> na::DMatrix<Complex64> {
        self.data
    }

    pub fn from_matrix(ell: usize, data: na::DMatrix<Complex64>) -> Result<Self> {
        if data.nrows() != 2 * ell + 1 || data.ncols() != 2 * ell + 1 {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}×{}, expected {}×{}",
                data.nrows(),
                data.ncols(),
                2 * ell + 1,
                2 * ell + 1
            )));
        }
        Ok(DMatrix { ell, data })
    }

    /// Largest entry of `D D† − 1`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = &self.data * self.data.adjoint();
        let id = na::DMatrix::<Complex64>::identity(self.dim(), self.dim());
        (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

type JyEigen = Arc<(Vec<f64>, na::DMatrix<Complex64>)>;

fn jy_cache() -> &'static RwLock<HashMap<usize, JyEigen>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, JyEigen>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Eigen-decomposition of `J_y` in the `|ℓ, m⟩` basis with the eigenvalues
/// snapped to the exact integers.
fn jy_eigen(ell: usize) -> JyEigen {
    if let Some(e) = jy_cache().read().expect("cache poisoned").get(&ell) {
        return e.clone();
    }
    let dim = 2 * ell + 1;
    let l = ell as f64;
    let mut jy = na::DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim - 1 {
        // ⟨m+1|J₊|m⟩ with m = i − ℓ.
        let m = i as f64 - l;
        let c = (l * (l + 1.0) - m * (m + 1.0)).sqrt();
        jy[(i + 1, i)] = Complex64::new(0.0, -0.5 * c);
        jy[(i, i + 1)] = Complex64::new(0.0, 0.5 * c);
    }
    let eig = na::SymmetricEigen::new(jy);
    let mu: Vec<f64> = eig.eigenvalues.iter().map(|x| x.round()).collect();
    let entry = Arc::new((mu, eig.eigenvectors));
    jy_cache().write().expect("cache poisoned").insert(ell, entry.clone());
    entry
}

/// The real matrix `d^ℓ(β) = exp(−iβJ_y)`.
pub fn small_d(ell: usize, beta: f64) -> na::DMatrix<f64> {
    let e = jy_eigen(ell);
    let (mu, v) = (&e.0, &e.1);
    let dim = 2 * ell + 1;
    let phases: Vec<Complex64> = mu.iter().map(|&x| Complex64::from_polar(1.0, -beta * x)).collect();
    let mut out = na::DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut s = Complex64::zero();
            for k in 0..dim {
                s += v[(i, k)] * phases[k] * v[(j, k)].conj();
            }
            out[(i, j)] = s.re;
        }
    }
    out
}

/// Single element `d^ℓ_{mn}(β)`.
pub fn small_d_element(ell: usize, m: i64, n: i64, beta: f64) -> f64 {
    let e = jy_eigen(ell);
    let (mu, v) = (&e.0, &e.1);
    let l = ell as i64;
    let (i, j) = ((m + l) as usize, (n + l) as usize);
    let mut s = Complex64::zero();
    for (k, &x) in mu.iter().enumerate() {
        s += v[(i, k)] * Complex64::from_polar(1.0, -beta * x) * v[(j, k)].conj();
    }
    s.re
}

/// Half-sum and half-difference of the Euler angles plus `β`, read directly
/// off the quaternion so that the gimbal poles need no special handling.
fn euler_halves(r: &Rotation) -> (f64, f64, f64) {
    let [w, x, y, z] = r.quaternion();
    let sp = z.atan2(w);
    let sm = (-x).atan2(y);
    let beta = 2.0 * x.hypot(y).atan2(w.hypot(z));
    (sp, sm, beta)
}

pub fn wigner_d(ell: usize, r: &Rotation) -> DMatrix {
    let (sp, sm, beta) = euler_halves(r);
    let d = small_d(ell, beta);
    let dim = 2 * ell + 1;
    let l = ell as i64;
    let data = na::DMatrix::from_fn(dim, dim, |i, j| {
        let (m, n) = (i as i64 - l, j as i64 - l);
        let ph = ((m + n) as f64) * sp + ((m - n) as f64) * sm;
        Complex64::from_polar(d[(i, j)], ph)
    });
    DMatrix { ell, data }
}

/// Single matrix element `D^ℓ_{mn}(R)`.
pub fn wigner_d_element(ell: usize, m: i64, n: i64, r: &Rotation) -> Complex64 {
    let (sp, sm, beta) = euler_halves(r);
    let ph = ((m + n) as f64) * sp + ((m - n) as f64) * sm;
    Complex64::from_polar(small_d_element(ell, m, n, beta), ph)
}

/// Character `χ_ℓ(ω) = sin((2ℓ+1)ω/2) / sin(ω/2)`.
pub fn character(ell: usize, omega: f64) -> f64 {
    (1..=ell).fold(1.0, |acc, m| acc + 2.0 * (m as f64 * omega).cos())
}

// ---------------------------------------------------------------------------
// Clebsch-Gordan coefficients

/// `C^{L, m₁+m₂}_{ℓ₁m₁ℓ₂m₂}` for every allowed `L`, starting at `l_min`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CgSeries {
    pub l_min: usize,
    pub values: Vec<f64>,
}

impl CgSeries {
    pub fn l_max(&self) -> usize {
        self.l_min + self.values.len().saturating_sub(1)
    }

    pub fn get(&self, l: usize) -> f64 {
        if l < self.l_min {
            return 0.0;
        }
        self.values.get(l - self.l_min).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.l_min + i, v))
    }
}

type CgKey = (usize, i64, usize, i64);

fn cg_cache() -> &'static RwLock<HashMap<CgKey, Arc<CgSeries>>> {
    static CACHE: OnceLock<RwLock<HashMap<CgKey, Arc<CgSeries>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// All Clebsch-Gordan coefficients coupling `|ℓ₁m₁⟩|ℓ₂m₂⟩` to `|L, m₁+m₂⟩`.
///
/// Uses the three-term recursion of the 3j symbols in their first argument,
/// run inwards from both ends and matched where the forward sweep stops
/// growing. Results are memoised.
pub fn cg_series(l1: usize, m1: i64, l2: usize, m2: i64) -> Arc<CgSeries> {
    let key = (l1, m1, l2, m2);
    if let Some(s) = cg_cache().read().expect("cache poisoned").get(&key) {
        return s.clone();
    }
    let s = Arc::new(cg_series_uncached(l1, m1, l2, m2));
    cg_cache().write().expect("cache poisoned").insert(key, s.clone());
    s
}

fn cg_series_uncached(l1: usize, m1: i64, l2: usize, m2: i64) -> CgSeries {
    let big_m = m1 + m2;
    let empty = CgSeries { l_min: 0, values: Vec::new() };
    if m1.unsigned_abs() as usize > l1 || m2.unsigned_abs() as usize > l2 {
        return empty;
    }
    let jmin = (l1 as i64 - l2 as i64).unsigned_abs().max(big_m.unsigned_abs()) as usize;
    let jmax = l1 + l2;
    if jmin > jmax {
        return empty;
    }
    let n = jmax - jmin + 1;

    // f(j) = ( j l1 l2 ; −M m1 m2 ).
    let (j2, j3) = (l1 as f64, l2 as f64);
    let (mm1, mm2, mm3) = (-(big_m as f64), m1 as f64, m2 as f64);
    let a = |j: f64| -> f64 {
        ((j * j - (j2 - j3).powi(2)) * ((j2 + j3 + 1.0).powi(2) - j * j) * (j * j - mm1 * mm1))
            .max(0.0)
            .sqrt()
    };
    let b = |j: f64| -> f64 {
        -(2.0 * j + 1.0)
            * (j2 * (j2 + 1.0) * mm1 - j3 * (j3 + 1.0) * mm1 - j * (j + 1.0) * (mm3 - mm2))
    };

    let mut f = vec![0.0; n];
    if n == 1 {
        f[0] = 1.0;
    } else {
        // Backward sweep from jmax.
        let mut back = vec![0.0; n];
        back[n - 1] = 1.0;
        // Forward sweep from jmin, stopped once magnitudes stop growing.
        let mut stop = 0;
        let mut fwd = vec![0.0; n];
        if jmin > 0 && n >= 4 {
            fwd[0] = 1.0;
            let mut k = 0;
            while k + 1 < n {
                let j = (jmin + k) as f64;
                let prev = if k == 0 { 0.0 } else { (j + 1.0) * a(j) * fwd[k - 1] };
                fwd[k + 1] = -(b(j) * fwd[k] + prev) / (j * a(j + 1.0));
                k += 1;
                if k >= 2 && fwd[k].abs() + fwd[k - 1].abs() < fwd[k - 1].abs() + fwd[k - 2].abs() {
                    break;
                }
                // Rescale to avoid overflow in long forbidden regions.
                let s = fwd[k].abs().max(fwd[k - 1].abs());
                if s > 1e100 {
                    for v in fwd.iter_mut().take(k + 1) {
                        *v /= s;
                    }
                }
            }
            stop = k;
        }
        let lo = stop.saturating_sub(2);
        let mut k = n - 1;
        while k > lo {
            let j = (jmin + k) as f64;
            let next = if k + 1 < n { j * a(j + 1.0) * back[k + 1] } else { 0.0 };
            back[k - 1] = -(b(j) * back[k] + next) / ((j + 1.0) * a(j));
            k -= 1;
            let s = back[k].abs().max(back[k + 1].abs());
            if s > 1e100 {
                for v in back.iter_mut().skip(k) {
                    *v /= s;
                }
            }
        }
        if stop == 0 {
            f = back;
        } else {
            // Least-squares match of the sweeps on the overlap lo..=stop.
            let (mut num, mut den) = (0.0, 0.0);
            for i in lo..=stop {
                num += fwd[i] * back[i];
                den += back[i] * back[i];
            }
            let scale = if den > 0.0 { num / den } else { 1.0 };
            for i in 0..n {
                f[i] = if i <= stop { fwd[i] } else { scale * back[i] };
            }
        }
    }
    let norm: f64 = f.iter().enumerate().map(|(i, v)| (2.0 * (jmin + i) as f64 + 1.0) * v * v).sum();
    let norm = norm.sqrt();
    let mut values: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (jmin + i) as f64 + 1.0).sqrt() * v / norm)
        .collect();
    // The stretched coefficient L = ℓ₁ + ℓ₂ is positive.
    if values[n - 1] < 0.0 {
        for v in values.iter_mut() {
            *v = -*v;
        }
    }
    for v in values.iter_mut() {
        if v.abs() < 1e-15 {
            *v = 0.0;
        }
    }
    CgSeries { l_min: jmin, values }
}

/// `⟨ℓ₁ m₁; ℓ₂ m₂ | L M⟩`, zero outside the selection rules.
pub fn clebsch_gordan(l1: usize, m1: i64, l2: usize, m2: i64, l: usize, m: i64) -> f64 {
    if m != m1 + m2 {
        return 0.0;
    }
    cg_series(l1, m1, l2, m2).get(l)
}

fn factorial(n: i64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

/// Squared coefficient with its sign, in exact rational arithmetic.
pub fn clebsch_gordan_exact_squared(l1: usize, m1: i64, l2: usize, m2: i64, l: usize, m: i64) -> (i8, BigRational) {
    let (j1, j2, j) = (l1 as i64, l2 as i64, l as i64);
    if m != m1 + m2 || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j || j < (j1 - j2).abs() || j > j1 + j2 {
        return (0, BigRational::zero());
    }
    let pre = BigRational::new(
        BigInt::from(2 * j + 1)
            * factorial(j + j1 - j2)
            * factorial(j - j1 + j2)
            * factorial(j1 + j2 - j)
            * factorial(j + m)
            * factorial(j - m)
            * factorial(j1 - m1)
            * factorial(j1 + m1)
            * factorial(j2 - m2)
            * factorial(j2 + m2),
        factorial(j1 + j2 + j + 1),
    );
    let mut sum = BigRational::zero();
    for k in 0..=(j1 + j2 - j) {
        let d = [k, j1 + j2 - j - k, j1 - m1 - k, j2 + m2 - k, j - j2 + m1 + k, j - j1 - m2 + k];
        if d.iter().any(|&x| x < 0) {
            continue;
        }
        let den = d.iter().fold(BigInt::one(), |acc, &x| acc * factorial(x));
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return (0, sum);
    }
    let sign = if sum.is_negative() { -1 } else { 1 };
    (sign, pre * &sum * &sum)
}

/// Racah's closed form evaluated exactly; only the final square root is
/// taken in floating point.
pub fn clebsch_gordan_exact(l1: usize, m1: i64, l2: usize, m2: i64, l: usize, m: i64) -> f64 {
    let (s, sq) = clebsch_gordan_exact_squared(l1, m1, l2, m2, l, m);
    if s == 0 {
        return 0.0;
    }
    s as f64 * sq.to_f64().unwrap_or(f64::NAN).sqrt()
}

/// `D^ℓ_{mn} D^{ℓ'}_{m'n'} = Σ_L c_L D^L_{m+m', n+n'}`; returns `(L, c_L)`.
pub fn d_product_expand(l1: usize, m1: i64, n1: i64, l2: usize, m2: i64, n2: i64) -> Vec<(usize, f64)> {
    let a = cg_series(l1, m1, l2, m2);
    let b = cg_series(l1, n1, l2, n2);
    let lo = a.l_min.max(b.l_min);
    let hi = l1 + l2;
    if a.values.is_empty() || b.values.is_empty() {
        return Vec::new();
    }
    (lo..=hi).map(|l| (l, a.get(l) * b.get(l))).filter(|(_, c)| *c != 0.0).collect()
}

// ---------------------------------------------------------------------------
// Spherical harmonics

/// `Y^ℓ_m(θ, φ)` with the Condon-Shortley phase, orthonormal on S².
pub fn spherical_harmonic(ell: usize, m: i64, p: &SpherePoint) -> Complex64 {
    if m.unsigned_abs() as usize > ell {
        return Complex64::zero();
    }
    let am = m.unsigned_abs() as usize;
    let plm = normalized_legendre(ell, am, p.theta.cos(), p.theta.sin());
    let y = Complex64::from_polar(plm, am as f64 * p.phi);
    if m >= 0 {
        y
    } else if am.is_multiple_of(2) {
        y.conj()
    } else {
        -y.conj()
    }
}

/// Every `Y^ℓ_m` with `ℓ ≤ l_max`, indexed by `ℓ² + ℓ + m`.
pub fn spherical_harmonics_upto(l_max: usize, p: &SpherePoint) -> Vec<Complex64> {
    let mut out = Vec::with_capacity((l_max + 1) * (l_max + 1));
    for l in 0..=l_max {
        for m in -(l as i64)..=(l as i64) {
            out.push(spherical_harmonic(l, m, p));
        }
    }
    out
}

/// Orthonormalised associated Legendre function including `(−1)^m`.
fn normalized_legendre(l: usize, m: usize, x: f64, s: f64) -> f64 {
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        pmm *= -((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm2 = pmm;
    for ll in (m + 2)..=l {
        let (lf, mf) = (ll as f64, m as f64);
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let p = a * (x * pm1 - b * pm2);
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}

/// `Y^{ℓ₁}_{m₁} Y^{ℓ₂}_{m₂} = Σ_L g_L Y^L_{m₁+m₂}`; returns `(L, g_L)`.
pub fn gaunt(l1: usize, m1: i64, l2: usize, m2: i64) -> Vec<(usize, f64)> {
    let z = cg_series(l1, 0, l2, 0);
    let c = cg_series(l1, m1, l2, m2);
    let pre = ((2 * l1 + 1) as f64 * (2 * l2 + 1) as f64 / (4.0 * PI)).sqrt();
    (c.l_min..=l1 + l2)
        .map(|l| (l, pre / ((2 * l + 1) as f64).sqrt() * z.get(l) * c.get(l)))
        .filter(|(_, g)| *g != 0.0)
        .collect()
}

// ---------------------------------------------------------------------------
// Quadrature

/// Nodes and positive weights of a cubature rule.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureRule<P> {
    pub nodes: Vec<P>,
    pub weights: Vec<f64>,
}

impl<P> QuadratureRule<P> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: Fn(&P) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| f(p) * *w).sum()
    }
}

/// Gauss-Legendre nodes and weights on `[−1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 1..=n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p2) / k as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Euler-angle product rule exact for `D^{ℓ*} D^{ℓ'}` with `ℓ, ℓ' ≤ l_max`.
/// Weights sum to `8π²`.
pub fn haar_quadrature(l_max: usize) -> QuadratureRule<Rotation> {
    let (xs, ws) = gauss_legendre(l_max + 1);
    let na = 2 * l_max + 1;
    let dw = 2.0 * PI / na as f64;
    let mut nodes = Vec::with_capacity(xs.len() * na * na);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for (x, w) in xs.iter().zip(&ws) {
        let beta = x.acos();
        for i in 0..na {
            for k in 0..na {
                nodes.push(Rotation::from_euler(i as f64 * dw, beta, k as f64 * dw));
                weights.push(w * dw * dw);
            }
        }
    }
    QuadratureRule { nodes, weights }
}

/// Product rule on S² exact for `Y^{ℓ*} Y^{ℓ'}` with `ℓ, ℓ' ≤ l_max`.
/// Weights sum to `4π`.
pub fn sphere_quadrature(l_max: usize) -> QuadratureRule<SpherePoint> {
    let (xs, ws) = gauss_legendre(l_max + 1);
    let np = 2 * l_max + 1;
    let dphi = 2.0 * PI / np as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (x, w) in xs.iter().zip(&ws) {
        for j in 0..np {
            nodes.push(SpherePoint::new(x.acos(), j as f64 * dphi));
            weights.push(w * dphi);
        }
    }
    QuadratureRule { nodes, weights }
}

/// Rule in axis-angle coordinates with measure `4 sin Θ sin²(ω/2) dΘ dΦ dω`.
pub fn axis_angle_quadrature(n_theta: usize, n_phi: usize, n_omega: usize) -> QuadratureRule<Rotation> {
    let (xt, wt) = gauss_legendre(n_theta);
    let (xo, wo) = gauss_legendre(n_omega);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (ct, wct) in xt.iter().zip(&wt) {
        for j in 0..n_phi {
            let axis = SpherePoint::new(ct.acos(), j as f64 * dphi).to_vec();
            for (u, wu) in xo.iter().zip(&wo) {
                let omega = 0.5 * PI * (u + 1.0);
                let r = Rotation::from_axis_angle(axis, omega).expect("unit axis");
                nodes.push(r);
                weights.push(wct * dphi * 0.5 * PI * wu * 4.0 * (0.5 * omega).sin().powi(2));
            }
        }
    }
    QuadratureRule { nodes, weights }
}

// ---------------------------------------------------------------------------
// Poisson summation

/// Both sides of `Σ_h f(h) = Σ_k ∫ e^{2πikx} f(x) dx` for
/// `f(x) = (2x+1)^p e^{−Δ²x(x+1)}`.
#[derive(Clone, Debug, Serialize)]
pub struct PoissonReport {
    pub delta: f64,
    pub power: u32,
    pub direct: f64,
    pub fourier: f64,
    /// The `k = 0` Fourier term alone.
    pub zero_mode: f64,
    pub terms: usize,
}

pub fn poisson_gaussian_sum(delta: f64, power: u32) -> Result<PoissonReport> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("Δ must be positive and finite, got {delta}")));
    }
    if !matches!(power, 0 | 2 | 4) {
        return Err(Error::Unsupported(format!("moment power {power}; use 0, 2 or 4")));
    }
    let d2 = delta * delta;
    let f = |x: f64| (2.0 * x + 1.0).powi(power as i32) * (-d2 * x * (x + 1.0)).exp();
    // Direct sum, symmetric about x = −1/2.
    let mut direct = 0.0;
    let mut h: i64 = 0;
    loop {
        let t = f(h as f64) + f((-1 - h) as f64);
        direct += t;
        h += 1;
        if t.abs() < 1e-300 || (h as f64 * delta > 40.0 && t.abs() < 1e-18 * direct.abs()) {
            break;
        }
    }
    let s2 = 1.0 / (2.0 * d2);
    let mass = PI.sqrt() / delta;
    let pre = (0.25 * d2).exp() * mass * 2f64.powi(power as i32);
    let term = |k: i64| -> f64 {
        let xi = 2.0 * PI * k as f64;
        let phi = (-0.5 * s2 * xi * xi).exp();
        let moment = match power {
            0 => phi,
            2 => (s2 - s2 * s2 * xi * xi) * phi,
            _ => (3.0 * s2 * s2 - 6.0 * s2.powi(3) * xi * xi + s2.powi(4) * xi.powi(4)) * phi,
        };
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * pre * moment
    };
    let zero_mode = term(0);
    let mut fourier = zero_mode;
    let mut k = 1;
    loop {
        let t = 2.0 * term(k);
        fourier += t;
        k += 1;
        if t.abs() <= 1e-18 * fourier.abs() || k > 10_000 {
            break;
        }
    }
    Ok(PoissonReport { delta, power, direct, fourier, zero_mode, terms: k as usize })
}
