//! Linear-rotor (S²) codes.
//!
//! Position states `|v̂⟩` and momentum states `|ℓ,m⟩` are related by
//! `|v̂⟩ = Σ Y^{ℓ*}_m(v̂)|ℓ,m⟩`; rotations act as `R̂|v̂⟩ = |Rv̂⟩` and parity
//! as `P̂|v̂⟩ = |−v̂⟩`. Point supports use counting normalisation as in
//! [`crate::molecular`].

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::molecular::{kl_from_images, KlReport};
use crate::reps::IrrepTable;
use crate::rotations::{FiniteSubgroup, Rotation, SpherePoint, SubgroupTag};
use crate::wigner::{gaunt, spherical_harmonic, wigner_d};

/// Points closer than this (chordal distance) are identified.
pub const POINT_TOL: f64 = 1e-9;

fn close(a: &SpherePoint, b: &SpherePoint) -> bool {
    let (u, v) = (a.to_vec(), b.to_vec());
    u.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() < POINT_TOL
}

/// A finite superposition of position states on S².
#[derive(Clone, Debug, PartialEq)]
pub struct PointState {
    support: Vec<(SpherePoint, Complex64)>,
}

impl PointState {
    pub fn unnormalized(points: Vec<(SpherePoint, Complex64)>) -> Self {
        let mut support: Vec<(SpherePoint, Complex64)> = Vec::with_capacity(points.len());
        for (p, a) in points {
            match support.iter_mut().find(|(q, _)| close(q, &p)) {
                Some(slot) => slot.1 += a,
                None => support.push((p, a)),
            }
        }
        support.retain(|(_, a)| a.norm() > 1e-15);
        PointState { support }
    }

    pub fn new(points: Vec<(SpherePoint, Complex64)>) -> Result<Self> {
        Self::unnormalized(points).normalized()
    }

    pub fn support(&self) -> &[(SpherePoint, Complex64)] {
        &self.support
    }

    pub fn norm_sqr(&self) -> f64 {
        self.support.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 1e-300) {
            return Err(Error::InvalidArgument("point state has zero norm".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        PointState { support: self.support.iter().map(|(p, a)| (*p, a * c)).collect() }
    }

    pub fn add(&self, other: &PointState) -> Self {
        let mut pts = self.support.clone();
        pts.extend_from_slice(&other.support);
        Self::unnormalized(pts)
    }

    pub fn amplitude_at(&self, p: &SpherePoint) -> Complex64 {
        self.support.iter().find(|(q, _)| close(q, p)).map(|x| x.1).unwrap_or_else(Complex64::zero)
    }

    pub fn inner(&self, other: &PointState) -> Complex64 {
        self.support.iter().map(|(p, a)| a.conj() * other.amplitude_at(p)).sum()
    }

    pub fn rotate(&self, r: &Rotation) -> Self {
        PointState { support: self.support.iter().map(|(p, a)| (p.rotate(r), *a)).collect() }
    }

    pub fn parity(&self) -> Self {
        PointState { support: self.support.iter().map(|(p, a)| (p.antipode(), *a)).collect() }
    }

    /// `Ŷ^ℓ_m`: multiplies each amplitude by `Y^ℓ_m(v̂)`.
    pub fn harmonic(&self, ell: usize, m: i64) -> Self {
        PointState { support: self.support.iter().map(|(p, a)| (*p, a * spherical_harmonic(ell, m, p))).collect() }
    }

    pub fn distance(&self, other: &PointState) -> f64 {
        let a = self.support.iter().map(|(p, x)| (x - other.amplitude_at(p)).norm());
        let b = other
            .support
            .iter()
            .filter(|(p, _)| !self.support.iter().any(|(q, _)| close(p, q)))
            .map(|(_, x)| x.norm());
        a.chain(b).fold(0.0, f64::max)
    }

    /// Damped momentum coefficients `Σ_v a_v Y^{ℓ*}_m(v) e^{−Δ²ℓ(ℓ+1)/2}`.
    pub fn to_harmonics(&self, l_max: usize, delta: f64) -> HarmonicState {
        let mut out = HarmonicState::zeros(l_max);
        for l in 0..=l_max {
            let damp = (-0.5 * delta * delta * (l * (l + 1)) as f64).exp();
            for m in -(l as i64)..=(l as i64) {
                let c: Complex64 = self.support.iter().map(|(p, a)| a * spherical_harmonic(l, m, p).conj()).sum();
                out.coeffs[HarmonicState::index(l, m)] = c * damp;
            }
        }
        out
    }
}

/// Coefficients `c^ℓ_m` for `ℓ ≤ l_max`, indexed by `ℓ² + ℓ + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicState {
    l_max: usize,
    coeffs: Vec<Complex64>,
}

impl HarmonicState {
    pub fn zeros(l_max: usize) -> Self {
        HarmonicState { l_max, coeffs: vec![Complex64::zero(); (l_max + 1) * (l_max + 1)] }
    }

    fn index(l: usize, m: i64) -> usize {
        ((l * l + l) as i64 + m) as usize
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        if l <= self.l_max && m.unsigned_abs() as usize <= l {
            self.coeffs[Self::index(l, m)]
        } else {
            Complex64::zero()
        }
    }

    pub fn set(&mut self, l: usize, m: i64, c: Complex64) -> Result<()> {
        if l > self.l_max || m.unsigned_abs() as usize > l {
            return Err(Error::InvalidArgument(format!("no component ({l},{m})")));
        }
        let i = Self::index(l, m);
        self.coeffs[i] = c;
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &HarmonicState) -> Complex64 {
        let n = (self.l_max.min(other.l_max) + 1).pow(2);
        self.coeffs[..n].iter().zip(&other.coeffs[..n]).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn evaluate(&self, p: &SpherePoint) -> Complex64 {
        let mut acc = Complex64::zero();
        for l in 0..=self.l_max {
            for m in -(l as i64)..=(l as i64) {
                acc += self.get(l, m) * spherical_harmonic(l, m, p);
            }
        }
        acc
    }

    /// `c′_m = Σ_n D^{ℓ*}_{mn}(R) c_n`.
    pub fn rotate(&self, r: &Rotation) -> Self {
        let mut out = HarmonicState::zeros(self.l_max);
        for l in 0..=self.l_max {
            let d = wigner_d(l, r);
            let li = l as i64;
            for m in -li..=li {
                let v: Complex64 = (-li..=li).map(|n| d.get(m, n).conj() * self.get(l, n)).sum();
                out.set(l, m, v).expect("in range");
            }
        }
        out
    }

    pub fn parity(&self) -> Self {
        let mut out = self.clone();
        for l in (1..=self.l_max).step_by(2) {
            for m in -(l as i64)..=(l as i64) {
                let i = Self::index(l, m);
                out.coeffs[i] = -out.coeffs[i];
            }
        }
        out
    }

    /// `Ŷ^ℓ_m` via Gaunt coefficients; returns the state and the squared norm
    /// pushed above `l_max`.
    pub fn harmonic(&self, ell: usize, m: i64) -> Result<(HarmonicState, f64)> {
        if m.unsigned_abs() as usize > ell {
            return Err(Error::InvalidArgument(format!("Y^{ell}_{m} does not exist")));
        }
        let mut wide = HarmonicState::zeros(self.l_max + ell);
        for l in 0..=self.l_max {
            for mp in -(l as i64)..=(l as i64) {
                let c = self.get(l, mp);
                if c == Complex64::zero() {
                    continue;
                }
                for (big_l, g) in gaunt(ell, m, l, mp) {
                    let i = Self::index(big_l, m + mp);
                    wide.coeffs[i] += c * g;
                }
            }
        }
        let n = (self.l_max + 1).pow(2);
        let dropped = wide.coeffs[n..].iter().map(|c| c.norm_sqr()).sum();
        wide.coeffs.truncate(n);
        wide.l_max = self.l_max;
        Ok((wide, dropped))
    }
}

/// A state on S² in either representation.
#[derive(Clone, Debug, PartialEq)]
pub enum SphereState {
    Points(PointState),
    Harmonics(HarmonicState),
}

impl SphereState {
    pub fn rotate(&self, r: &Rotation) -> Self {
        match self {
            SphereState::Points(p) => SphereState::Points(p.rotate(r)),
            SphereState::Harmonics(h) => SphereState::Harmonics(h.rotate(r)),
        }
    }

    pub fn parity(&self) -> Self {
        match self {
            SphereState::Points(p) => SphereState::Points(p.parity()),
            SphereState::Harmonics(h) => SphereState::Harmonics(h.parity()),
        }
    }

    /// `Ŷ^ℓ_m`; harmonic states are truncated at their cutoff.
    pub fn harmonic(&self, ell: usize, m: i64) -> Result<Self> {
        match self {
            SphereState::Points(p) => Ok(SphereState::Points(p.harmonic(ell, m))),
            SphereState::Harmonics(h) => Ok(SphereState::Harmonics(h.harmonic(ell, m)?.0)),
        }
    }
}

// ---------------------------------------------------------------------------
// Codes

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereFamily {
    /// `Z_N ⊂ Z_N × Z₂^P` on the equator, `N` odd.
    Cyclic(usize),
    /// `T ⊂ T × Z₂^P` on the cube.
    Tetrahedral,
}

/// A two-dimensional code whose codewords sit on antipodal `H`-orbits.
#[derive(Clone, Debug)]
pub struct SphereCode {
    pub family: SphereFamily,
    pub h: FiniteSubgroup,
    pub codewords: Vec<PointState>,
}

/// The cube vertex `(1,1,1)/√3`.
pub fn cube_vertex() -> SpherePoint {
    SpherePoint::from_vec([1.0, 1.0, 1.0]).expect("nonzero")
}

pub fn build_sphere_code(family: SphereFamily) -> Result<SphereCode> {
    let (h, seed, amp) = match family {
        SphereFamily::Cyclic(n) => {
            if n % 2 == 0 {
                return Err(Error::InvalidArgument(format!(
                    "N = {n} is even, so the two codewords are not antipodal"
                )));
            }
            let g = FiniteSubgroup::new(SubgroupTag::Cyclic(n))?;
            let amp = 1.0 / (n as f64).sqrt();
            (g, SpherePoint::new(0.5 * PI, 0.0), amp)
        }
        // Each of the 4 vertices is hit by 3 elements of T.
        SphereFamily::Tetrahedral => (FiniteSubgroup::new(SubgroupTag::Tetrahedral)?, cube_vertex(), 1.0 / 6.0),
    };
    let zero = PointState::unnormalized(
        h.elements().iter().map(|r| (seed.rotate(r), Complex64::new(amp, 0.0))).collect(),
    );
    let one = zero.parity();
    Ok(SphereCode { family, h, codewords: vec![zero, one] })
}

impl SphereCode {
    pub fn logical_state(&self, c0: Complex64, c1: Complex64) -> Result<PointState> {
        self.codewords[0].scale(c0).add(&self.codewords[1].scale(c1)).normalized()
    }

    /// The first constituent point of `|0̄⟩`.
    pub fn anchor(&self) -> SpherePoint {
        self.codewords[0].support()[0].0
    }
}

/// An error on S².
#[derive(Clone, Debug, PartialEq)]
pub enum SphereError {
    Identity,
    Rotation(Rotation),
    Harmonic { ell: usize, m: i64 },
    /// `Ŷ^ℓ_m R̂`: rotate, then kick.
    Combined { rotation: Rotation, ell: usize, m: i64 },
}

impl SphereError {
    pub fn apply(&self, s: &PointState) -> PointState {
        match self {
            SphereError::Identity => s.clone(),
            SphereError::Rotation(r) => s.rotate(r),
            SphereError::Harmonic { ell, m } => s.harmonic(*ell, *m),
            SphereError::Combined { rotation, ell, m } => s.rotate(rotation).harmonic(*ell, *m),
        }
    }

    pub fn label(&self) -> String {
        let q = |r: &Rotation| {
            let [w, x, y, z] = r.quaternion();
            format!("[{w:.6},{x:.6},{y:.6},{z:.6}]")
        };
        match self {
            SphereError::Identity => "I".into(),
            SphereError::Rotation(r) => format!("R{}", q(r)),
            SphereError::Harmonic { ell, m } => format!("Y^{ell}_{m}"),
            SphereError::Combined { rotation, ell, m } => format!("Y^{ell}_{m}·R{}", q(rotation)),
        }
    }
}

/// Knill-Laflamme conditions over the identity and the given errors.
pub fn kl_check_sphere(code: &SphereCode, errors: &[SphereError]) -> KlReport {
    let mut ops = vec![SphereError::Identity];
    ops.extend(errors.iter().filter(|e| **e != SphereError::Identity).cloned());
    let images: Vec<Vec<PointState>> = ops.iter().map(|e| code.codewords.iter().map(|c| e.apply(c)).collect()).collect();
    kl_from_images(ops.iter().map(|e| e.label()).collect(), &images, |a, b| a.inner(b))
}

/// The combined-shift matrix elements `⟨r̄|R̂†Ŷ^ℓ_m R̂′|r̄⟩` with
/// `R′ = R·R_{ω,v̂₁}`, so that both rotations carry the anchor `v̂₁` to `v̂₂ = Rv̂₁`.
#[derive(Clone, Debug, Serialize)]
pub struct CombinedWitness {
    pub ell: usize,
    pub m: i64,
    pub v2: SpherePoint,
    pub zero: [f64; 2],
    pub one: [f64; 2],
    /// `Y^ℓ_m(v̂₂)/N`.
    pub predicted_zero: [f64; 2],
    /// `(−1)^ℓ Y^ℓ_m(v̂₂)/N`.
    pub predicted_one: [f64; 2],
    pub violated: bool,
}

pub fn combined_shift_witness(code: &SphereCode, r: &Rotation, omega: f64, ell: usize, m: i64) -> Result<CombinedWitness> {
    let v1 = code.anchor();
    let r2 = r.compose(&Rotation::from_axis_angle(v1.to_vec(), omega)?);
    let v2 = v1.rotate(r);
    let elem = |c: &PointState| c.rotate(r).inner(&c.rotate(&r2).harmonic(ell, m));
    let (a, b) = (elem(&code.codewords[0]), elem(&code.codewords[1]));
    let size = code.codewords[0].support().len() as f64;
    let y = spherical_harmonic(ell, m, &v2) / size;
    let sign = if ell.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(CombinedWitness {
        ell,
        m,
        v2,
        zero: [a.re, a.im],
        one: [b.re, b.im],
        predicted_zero: [y.re, y.im],
        predicted_one: [sign * y.re, sign * y.im],
        violated: (a - b).norm() > 1e-10,
    })
}

// ---------------------------------------------------------------------------
// Check operators

/// `cos(2Nφ) sin^{2N}θ`.
pub fn cyclic_s_z(n: usize, p: &SpherePoint) -> f64 {
    (2.0 * n as f64 * p.phi).cos() * p.theta.sin().powi(2 * n as i32)
}

/// `(3/16)(30cos²θ − 35cos⁴θ − 5sin⁴θ cos4φ − 3)`.
pub fn tetrahedral_s_z(p: &SpherePoint) -> f64 {
    let (c, s) = (p.theta.cos(), p.theta.sin());
    3.0 / 16.0 * (30.0 * c * c - 35.0 * c.powi(4) - 5.0 * s.powi(4) * (4.0 * p.phi).cos() - 3.0)
}

/// `(3√3/2) sin²θ cosθ sin2φ`.
pub fn tetrahedral_logical_z(p: &SpherePoint) -> f64 {
    let (c, s) = (p.theta.cos(), p.theta.sin());
    1.5 * 3f64.sqrt() * s * s * c * (2.0 * p.phi).sin()
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereChecks {
    pub family: SphereFamily,
    /// `S_Z` at every constituent point of both codewords.
    pub s_z_values: Vec<f64>,
    /// `Z̄` on each codeword's constituents (tetrahedral family only).
    pub logical_z_values: Vec<Vec<f64>>,
    /// `⟨r̄|S_X|r̄⟩` for each X-type check and codeword.
    pub s_x_eigenvalues: Vec<Vec<f64>>,
    pub s_x_labels: Vec<String>,
}

impl SphereChecks {
    pub fn certified(&self) -> bool {
        self.s_z_values.iter().all(|v| (v - 1.0).abs() < 1e-10)
            && self.s_x_eigenvalues.iter().flatten().all(|v| (v - 1.0).abs() < 1e-10)
    }
}

/// `⟨ψ|cos(θ n̂·L̂)|ψ⟩ = Re⟨ψ|R̂_{θ,n̂}|ψ⟩` on a point state.
fn cos_rotation_expectation(s: &PointState, r: &Rotation) -> f64 {
    s.inner(&s.rotate(r)).re / s.norm_sqr()
}

pub fn check_operators_s2(code: &SphereCode) -> Result<SphereChecks> {
    let all: Vec<SpherePoint> = code.codewords.iter().flat_map(|c| c.support().iter().map(|p| p.0)).collect();
    let (s_z_values, logical_z_values, gens, labels) = match code.family {
        SphereFamily::Cyclic(n) => (
            all.iter().map(|p| cyclic_s_z(n, p)).collect(),
            Vec::new(),
            vec![Rotation::about_z(TAU / n as f64)],
            vec![format!("cos(2π/{n} L_z)")],
        ),
        SphereFamily::Tetrahedral => (
            all.iter().map(tetrahedral_s_z).collect(),
            code.codewords
                .iter()
                .map(|c| c.support().iter().map(|p| tetrahedral_logical_z(&p.0)).collect())
                .collect(),
            vec![Rotation::from_axis_angle([1.0, 1.0, 1.0], TAU / 3.0)?, Rotation::about_z(PI)],
            vec!["cos(2π/(3√3) (L_x+L_y+L_z))".into(), "(−1)^{L_z}".into()],
        ),
    };
    let s_x_eigenvalues = gens
        .iter()
        .map(|g| code.codewords.iter().map(|c| cos_rotation_expectation(c, g)).collect())
        .collect();
    Ok(SphereChecks { family: code.family, s_z_values, logical_z_values, s_x_eigenvalues, s_x_labels: labels })
}

/// Coefficients over `{Y^ℓ_p}` of `(1/|K|) Σ_k R̂_k Ŷ^ℓ_m R̂_k†`, i.e.
/// `Σ_p D^{ℓ*}_{pm}(K) Y^ℓ_p`. With `parity`, `K` is extended by `Z₂^P`.
pub fn twirl_harmonic(ell: usize, m: i64, k: &FiniteSubgroup, parity: bool) -> Vec<Complex64> {
    let l = ell as i64;
    let mut out = vec![Complex64::zero(); 2 * ell + 1];
    if parity && ell % 2 == 1 {
        return out;
    }
    for g in k.elements() {
        let d = wigner_d(ell, g);
        for p in -l..=l {
            out[(p + l) as usize] += d.get(p, m).conj();
        }
    }
    let scale = 1.0 / k.order() as f64;
    out.iter_mut().for_each(|c| *c *= scale);
    out
}

/// `Σ_p c_p Y^ℓ_p(v̂)`.
pub fn evaluate_harmonic_combination(ell: usize, coeffs: &[Complex64], p: &SpherePoint) -> Complex64 {
    let l = ell as i64;
    (-l..=l).zip(coeffs).map(|(q, c)| c * spherical_harmonic(ell, q, p)).sum()
}

// ---------------------------------------------------------------------------
// Designs

#[derive(Clone, Debug, Serialize)]
pub struct DesignReport {
    pub points: usize,
    pub checked_up_to: usize,
    pub is_design: bool,
    /// Largest `L′ ≤ L` for which the set is an `L′`-design.
    pub strength: usize,
    pub first_violation: Option<usize>,
    /// `max_m |mean Y^ℓ_m − δ_{ℓ0}/√(4π)|` for each `ℓ`.
    pub defects: Vec<f64>,
}

pub const DESIGN_TOL: f64 = 1e-10;

/// Checks `(1/|P|) Σ_p Y^ℓ_m(p) = δ_{ℓ0} δ_{m0} / √(4π)` for `ℓ ≤ L`.
pub fn is_spherical_design(points: &[SpherePoint], l: usize) -> Result<DesignReport> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty point set".into()));
    }
    let k = points.len() as f64;
    let defects: Vec<f64> = (0..=l)
        .map(|ell| {
            let li = ell as i64;
            (-li..=li)
                .map(|m| {
                    let mean: Complex64 = points.iter().map(|p| spherical_harmonic(ell, m, p)).sum::<Complex64>() / k;
                    let want = if ell == 0 { 1.0 / (4.0 * PI).sqrt() } else { 0.0 };
                    (mean - want).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let first_violation = defects.iter().position(|d| *d > DESIGN_TOL);
    let strength = first_violation.map(|v| v.saturating_sub(1)).unwrap_or(l);
    Ok(DesignReport { points: points.len(), checked_up_to: l, is_design: first_violation.is_none(), strength, first_violation, defects })
}

/// Named point sets: `cube`, `tetrahedron`, `octahedron`, `icosahedron` and `equator:N`.
pub fn point_set(name: &str) -> Result<Vec<SpherePoint>> {
    let from = |v: Vec<[f64; 3]>| v.into_iter().map(SpherePoint::from_vec).collect::<Result<Vec<_>>>();
    match name {
        "cube" => from((0..8).map(|i| [sgn(i, 0), sgn(i, 1), sgn(i, 2)]).collect()),
        "tetrahedron" => from(vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]),
        "octahedron" => from(vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]),
        "icosahedron" => {
            let g = 0.5 * (1.0 + 5f64.sqrt());
            let mut v = Vec::new();
            for a in [1.0, -1.0] {
                for b in [g, -g] {
                    v.push([0.0, a, b]);
                    v.push([a, b, 0.0]);
                    v.push([b, 0.0, a]);
                }
            }
            from(v)
        }
        _ => {
            let n: usize = name
                .strip_prefix("equator:")
                .and_then(|s| s.parse().ok())
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown point set '{name}'")))?;
            Ok((0..n).map(|h| SpherePoint::new(0.5 * PI, TAU * h as f64 / n as f64)).collect())
        }
    }
}

fn sgn(i: usize, bit: usize) -> f64 {
    if (i >> bit) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

// ---------------------------------------------------------------------------
// Partial Fourier basis and recovery

/// Whether `φ` lies in the lune `(−π/2N, π/2N]`.
pub fn in_lune(p: &SpherePoint, n: usize) -> bool {
    let half = PI / (2.0 * n as f64);
    let phi = wrap_pi(p.phi);
    phi > -half + 1e-15 && phi <= half + 1e-15
}

fn wrap_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

fn is_cone_point(p: &SpherePoint) -> bool {
    p.theta.sin().abs() < 1e-12
}

/// `|c H ŵ; λ_{μν}⟩ ∝ Σ_{R∈H} ρ^λ_{μν}(R) |c R ŵ⟩` with `c ∈ {1, P}`, normalised.
///
/// At seeds with a nontrivial stabiliser the sum can cancel; such labels are
/// rejected (for cone points of `Z_N`, every `λ ≠ 0`).
pub fn s2_partial_fourier(seed: &SpherePoint, table: &IrrepTable, coset: usize, irrep: usize, mu: usize, nu: usize) -> Result<PointState> {
    if coset > 1 {
        return Err(Error::InvalidArgument(format!("coset index {coset} must be 0 or 1")));
    }
    let ir = table
        .irreps
        .get(irrep)
        .ok_or_else(|| Error::InvalidArgument(format!("no irrep {irrep}")))?;
    if mu >= ir.dim || nu >= ir.dim {
        return Err(Error::InvalidArgument("irrep indices out of range".into()));
    }
    let pts: Vec<(SpherePoint, Complex64)> = table
        .group
        .elements()
        .iter()
        .zip(&ir.matrices)
        .map(|(r, mat)| {
            let p = seed.rotate(r);
            (if coset == 1 { p.antipode() } else { p }, mat[(mu, nu)])
        })
        .collect();
    let st = PointState::unnormalized(pts);
    if st.norm_sqr() < 1e-20 {
        return Err(Error::InvalidArgument(format!(
            "irrep {} element ({mu},{nu}) vanishes on this orbit",
            ir.label
        )));
    }
    st.normalized()
}

/// Logical density matrix in the `{|0̄⟩, |1̄⟩}` basis.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogicalDensity {
    pub rho: [[[f64; 2]; 2]; 2],
}

impl LogicalDensity {
    fn from_complex(m: [[Complex64; 2]; 2]) -> Self {
        let mut rho = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                rho[i][j] = [m[i][j].re, m[i][j].im];
            }
        }
        LogicalDensity { rho }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.rho[i][j][0], self.rho[i][j][1])
    }

    pub fn trace(&self) -> f64 {
        self.rho[0][0][0] + self.rho[1][1][0]
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalised logical state.
    pub fn fidelity(&self, c0: Complex64, c1: Complex64) -> f64 {
        let c = [c0, c1];
        let mut acc = Complex64::zero();
        for i in 0..2 {
            for j in 0..2 {
                acc += c[i].conj() * self.entry(i, j) * c[j];
            }
        }
        acc.re
    }
}

/// Recovery for the odd-`N` equatorial code built from the partial Fourier basis.
///
/// Each subspace `{|r Z_N(ŵ); λ⟩}_r` is mapped isometrically onto the code
/// space; cone points go to `(|0̄⟩ + |1̄⟩)/√2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct S2Recovery {
    pub n: usize,
}

pub fn s2_recovery(code: &SphereCode) -> Result<S2Recovery> {
    match code.family {
        SphereFamily::Cyclic(n) => Ok(S2Recovery { n }),
        SphereFamily::Tetrahedral => Err(Error::Unsupported("recovery is implemented for the Z_N family only".into())),
    }
}

impl S2Recovery {
    /// Writes `v̂` as `c R_{2πh/N} ŵ` with `ŵ` in the lune: returns `(ŵ, r, h)`.
    pub fn locate(&self, p: &SpherePoint) -> (SpherePoint, usize, usize) {
        let n = self.n;
        let step = PI / n as f64;
        let k = (0..2 * n)
            .find(|&k| in_lune(&SpherePoint::new(p.theta, p.phi - k as f64 * step), n))
            .expect("lunes cover the sphere");
        let phi = wrap_pi(p.phi - k as f64 * step);
        if k % 2 == 0 {
            (SpherePoint::new(p.theta, phi), 0, k / 2)
        } else {
            let h = ((k as i64 - n as i64) / 2).rem_euclid(n as i64) as usize;
            (SpherePoint::new(PI - p.theta, phi), 1, h)
        }
    }

    pub fn apply(&self, state: &PointState) -> LogicalDensity {
        let n = self.n;
        let norm = state.norm_sqr();
        let plus = Complex64::new(0.5, 0.0);
        let mut rho = [[Complex64::zero(); 2]; 2];
        // Amplitudes grouped by orbit seed: amp[r][h].
        let mut orbits: Vec<(SpherePoint, Vec<[Complex64; 2]>)> = Vec::new();
        for (p, a) in state.support() {
            if is_cone_point(p) {
                let w = a.norm_sqr() / norm;
                for row in rho.iter_mut() {
                    for x in row.iter_mut() {
                        *x += plus * w;
                    }
                }
                continue;
            }
            let (seed, r, h) = self.locate(p);
            let slot = match orbits.iter().position(|(s, _)| close(s, &seed)) {
                Some(i) => i,
                None => {
                    orbits.push((seed, vec![[Complex64::zero(); 2]; n]));
                    orbits.len() - 1
                }
            };
            orbits[slot].1[h][r] += a;
        }
        let sn = (n as f64).sqrt();
        for (_, amps) in &orbits {
            for lam in 0..n {
                let mut v = [Complex64::zero(); 2];
                for (h, pair) in amps.iter().enumerate() {
                    let ph = Complex64::from_polar(1.0 / sn, -TAU * (lam * h) as f64 / n as f64);
                    v[0] += ph * pair[0];
                    v[1] += ph * pair[1];
                }
                for i in 0..2 {
                    for j in 0..2 {
                        rho[i][j] += v[i] * v[j].conj() / norm;
                    }
                }
            }
        }
        LogicalDensity::from_complex(rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::irrep_table;
    use crate::wigner::{haar_quadrature, sphere_quadrature};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_points(rng: &mut ChaCha8Rng, k: usize) -> PointState {
        let pts = (0..k)
            .map(|_| {
                let p = SpherePoint::new(rng.gen_range(0.0f64..1.0).acos() * 2.0, rng.gen_range(0.0..TAU));
                (p, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            })
            .collect();
        PointState::new(pts).unwrap()
    }

    #[test]
    fn cyclic_codewords_and_momentum_view() {
        let code = build_sphere_code(SphereFamily::Cyclic(3)).unwrap();
        for h in 0..3 {
            let p = SpherePoint::new(0.5 * PI, TAU * h as f64 / 3.0);
            assert!((code.codewords[0].amplitude_at(&p).re - 1.0 / 3f64.sqrt()).abs() < 1e-14);
            let q = SpherePoint::new(0.5 * PI, TAU * h as f64 / 3.0 + PI / 3.0);
            assert!((code.codewords[1].amplitude_at(&q).re - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        }
        assert!(code.codewords[0].parity().distance(&code.codewords[1]) < 1e-14);
        for (r, cw) in code.codewords.iter().enumerate() {
            let hs = cw.to_harmonics(8, 0.0);
            for l in 0..=8usize {
                for m in -(l as i64)..=(l as i64) {
                    let want = if m % 3 == 0 {
                        let sign = if ((m / 3) * r as i64) % 2 == 0 { 1.0 } else { -1.0 };
                        3f64.sqrt() * sign * spherical_harmonic(l, m, &SpherePoint::new(0.5 * PI, 0.0)).re
                    } else {
                        0.0
                    };
                    assert!((hs.get(l, m) - c(want, 0.0)).norm() < 1e-12, "r={r} ({l},{m})");
                }
            }
        }
        assert!(build_sphere_code(SphereFamily::Cyclic(4)).is_err());
        let t = build_sphere_code(SphereFamily::Tetrahedral).unwrap();
        assert_eq!(t.codewords[0].support().len(), 4);
        assert!(t.codewords.iter().all(|w| w.support().iter().all(|(_, a)| (a.re - 0.5).abs() < 1e-14)));
        let cube = point_set("cube").unwrap();
        for w in &t.codewords {
            assert!(w.support().iter().all(|(p, _)| cube.iter().any(|q| close(p, q))));
        }
    }

    #[test]
    fn rotation_and_parity_in_both_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = random_points(&mut rng, 4);
        let r = Rotation::haar_random(&mut rng);
        let a = psi.rotate(&r).to_harmonics(6, 0.2);
        let b = psi.to_harmonics(6, 0.2).rotate(&r);
        assert!(a.coeffs.iter().zip(&b.coeffs).all(|(x, y)| (x - y).norm() < 1e-10));
        let a = psi.parity().to_harmonics(6, 0.2);
        let b = psi.to_harmonics(6, 0.2).parity();
        assert!(a.coeffs.iter().zip(&b.coeffs).all(|(x, y)| (x - y).norm() < 1e-12));
        assert!(psi.parity().parity().distance(&psi) < 1e-14);
        assert!(psi.parity().rotate(&r).distance(&psi.rotate(&r).parity()) < 1e-10);
        let h = psi.to_harmonics(5, 0.0);
        assert!(h.parity().rotate(&r).coeffs.iter().zip(&h.rotate(&r).parity().coeffs).all(|(x, y)| (x - y).norm() < 1e-10));
        // Rotations about v̂ fix |v̂⟩.
        let v = SpherePoint::new(1.0, 0.4);
        let st = PointState::new(vec![(v, c(1.0, 0.0))]).unwrap();
        for w in [0.3, -2.0] {
            let rot = Rotation::from_axis_angle(v.to_vec(), w).unwrap();
            assert!(st.rotate(&rot).distance(&st) < 1e-12);
            assert!(st.rotate(&Rotation::from_axis_angle(v.antipode().to_vec(), w).unwrap()).distance(&st) < 1e-12);
        }
    }

    #[test]
    fn harmonic_kicks() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi = random_points(&mut rng, 3);
        let y00 = psi.harmonic(0, 0);
        assert!(y00.distance(&psi.scale(c(1.0 / (4.0 * PI).sqrt(), 0.0))) < 1e-14);
        // Gaunt expansion agrees with pointwise multiplication.
        for _ in 0..20 {
            let ell = rng.gen_range(0..4usize);
            let m = rng.gen_range(-(ell as i64)..=(ell as i64));
            let hs = random_points(&mut rng, 2).to_harmonics(5, 0.0);
            let (out, _) = hs.harmonic(ell, m).unwrap();
            let mut wide = HarmonicState::zeros(5 + ell);
            wide.coeffs[..hs.coeffs.len()].copy_from_slice(&hs.coeffs);
            let (full, dropped) = wide.harmonic(ell, m).unwrap();
            assert!(dropped < 1e-20);
            for _ in 0..3 {
                let p = SpherePoint::new(rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU));
                assert!((full.evaluate(&p) - hs.evaluate(&p) * spherical_harmonic(ell, m, &p)).norm() < 1e-9);
            }
            assert!(out.norm_sqr() <= full.norm_sqr() + 1e-12);
        }
        // Selection rule on a single |ℓ′,m′⟩.
        let mut single = HarmonicState::zeros(8);
        single.set(3, 1, c(1.0, 0.0)).unwrap();
        let (out, _) = single.harmonic(2, -2).unwrap();
        for l in 0..=8usize {
            for m in -(l as i64)..=(l as i64) {
                if out.get(l, m).norm() > 1e-12 {
                    assert!((1..=5).contains(&l) && m == -1);
                }
            }
        }
        // Y^N_N is logical Z on the equatorial code.
        let code = build_sphere_code(SphereFamily::Cyclic(3)).unwrap();
        let y = spherical_harmonic(3, 3, &SpherePoint::new(0.5 * PI, 0.0));
        assert!(code.codewords[0].harmonic(3, 3).distance(&code.codewords[0].scale(y)) < 1e-12);
        assert!(code.codewords[1].harmonic(3, 3).distance(&code.codewords[1].scale(-y)) < 1e-12);
    }

    #[test]
    fn kl_on_the_sphere() {
        let code = build_sphere_code(SphereFamily::Cyclic(3)).unwrap();
        let small = [
            SphereError::Rotation(Rotation::about_z(0.3)),
            SphereError::Rotation(Rotation::from_axis_angle([0.2, 1.0, 0.1], 0.25).unwrap()),
        ];
        assert!(kl_check_sphere(&code, &small).passed());
        let kicks: Vec<SphereError> = (0..=1usize)
            .flat_map(|l| (-(l as i64)..=(l as i64)).map(move |m| SphereError::Harmonic { ell: l, m }))
            .collect();
        assert!(kl_check_sphere(&code, &kicks).passed());
        let combined = [SphereError::Combined {
            rotation: Rotation::from_axis_angle(code.anchor().to_vec(), 0.2).unwrap(),
            ell: 1,
            m: 1,
        }];
        assert!(!kl_check_sphere(&code, &combined).passed());
        for (ell, m) in [(1usize, 1i64), (2, 2), (3, -1), (3, 3)] {
            let w = combined_shift_witness(&code, &Rotation::from_euler(0.1, 0.2, 0.05), 0.3, ell, m).unwrap();
            for (got, want) in [(w.zero, w.predicted_zero), (w.one, w.predicted_one)] {
                assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
            }
            let nonzero = spherical_harmonic(ell, m, &w.v2).norm() > 1e-9;
            assert_eq!(w.violated, ell % 2 == 1 && nonzero);
        }
    }

    #[test]
    fn check_operators_on_both_families() {
        let z = build_sphere_code(SphereFamily::Cyclic(5)).unwrap();
        let rep = check_operators_s2(&z).unwrap();
        assert_eq!(rep.s_z_values.len(), 10);
        assert!(rep.certified(), "{rep:?}");
        for h in 0..10 {
            assert!((cyclic_s_z(5, &SpherePoint::new(0.5 * PI, PI * h as f64 / 5.0)) - 1.0).abs() < 1e-12);
        }
        let t = build_sphere_code(SphereFamily::Tetrahedral).unwrap();
        let rep = check_operators_s2(&t).unwrap();
        assert!(rep.certified(), "{rep:?}");
        assert!(rep.logical_z_values[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(rep.logical_z_values[1].iter().all(|v| (v + 1.0).abs() < 1e-12));
        let corner = SpherePoint::new((1.0f64 / 3.0).sqrt().acos(), PI / 4.0);
        assert!((tetrahedral_s_z(&corner) - 1.0).abs() < 1e-12);
        // S_X eigenvalue on |0̄⟩_X from its momentum support.
        let plus = z.logical_state(c(1.0, 0.0), c(1.0, 0.0)).unwrap().to_harmonics(12, 0.0);
        for l in 0..=12usize {
            for m in -(l as i64)..=(l as i64) {
                if plus.get(l, m).norm() > 1e-12 {
                    assert_eq!(m.rem_euclid(10), 0);
                }
            }
        }
    }

    #[test]
    fn twirled_harmonics() {
        let t = FiniteSubgroup::new(SubgroupTag::Tetrahedral).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let grid: Vec<SpherePoint> =
            (0..40).map(|_| SpherePoint::new(rng.gen_range(0.05..PI - 0.05), rng.gen_range(0.0..TAU))).collect();
        let ratio_const = |coef: &[Complex64], ell: usize, f: &dyn Fn(&SpherePoint) -> f64| {
            let rs: Vec<Complex64> = grid
                .iter()
                .filter(|p| f(p).abs() > 1e-3)
                .map(|p| evaluate_harmonic_combination(ell, coef, p) / f(p))
                .collect();
            assert!(rs[0].norm() > 1e-6);
            assert!(rs.iter().all(|r| (r - rs[0]).norm() < 1e-10 * rs[0].norm().max(1.0)));
        };
        ratio_const(&twirl_harmonic(4, 0, &t, true), 4, &|p| tetrahedral_s_z(p));
        ratio_const(&twirl_harmonic(3, 2, &t, false), 3, &|p| tetrahedral_logical_z(p));
        for m in -1i64..=1 {
            assert!(twirl_harmonic(1, m, &t, false).iter().all(|z| z.norm() < 1e-12));
        }
        assert!(twirl_harmonic(3, 2, &t, true).iter().all(|z| z.norm() < 1e-12));
        // Against direct averaging of Y(k⁻¹v̂).
        let coef = twirl_harmonic(4, 3, &t, false);
        for p in grid.iter().take(5) {
            let direct: Complex64 =
                t.elements().iter().map(|k| spherical_harmonic(4, 3, &p.rotate(&k.inverse()))).sum::<Complex64>() / 12.0;
            assert!((direct - evaluate_harmonic_combination(4, &coef, p)).norm() < 1e-12);
        }
    }

    #[test]
    fn designs() {
        let cube = is_spherical_design(&point_set("cube").unwrap(), 6).unwrap();
        assert_eq!((cube.strength, cube.first_violation), (3, Some(4)));
        let tet = is_spherical_design(&point_set("tetrahedron").unwrap(), 4).unwrap();
        assert_eq!(tet.strength, 2);
        let eq = is_spherical_design(&point_set("equator:3").unwrap(), 2).unwrap();
        assert!(!eq.is_design && eq.first_violation == Some(2));
        let ico = is_spherical_design(&point_set("icosahedron").unwrap(), 6).unwrap();
        assert_eq!(ico.strength, 5);
        let oct = is_spherical_design(&point_set("octahedron").unwrap(), 4).unwrap();
        assert_eq!(oct.strength, 3);
        assert!(point_set("dodecahedron").is_err());
        assert!(is_spherical_design(&[], 2).is_err());
    }

    #[test]
    fn partial_fourier_basis() {
        let n = 3;
        let table = irrep_table(&FiniteSubgroup::new(SubgroupTag::Cyclic(n)).unwrap()).unwrap();
        let seeds = [SpherePoint::new(0.5 * PI, 0.0), SpherePoint::new(0.7, 0.3), SpherePoint::new(2.0, -0.4), SpherePoint::new(0.3, PI / 6.0)];
        let mut basis = Vec::new();
        for s in &seeds {
            assert!(in_lune(s, n));
            for r in 0..2 {
                for lam in 0..n {
                    basis.push(s2_partial_fourier(s, &table, r, lam, 0, 0).unwrap());
                }
            }
        }
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b).norm() - want).abs() < 1e-12);
            }
        }
        let code = build_sphere_code(SphereFamily::Cyclic(3)).unwrap();
        assert!(basis[0].distance(&code.codewords[0]) < 1e-12);
        assert!(basis[3].distance(&code.codewords[1]) < 1e-12);
        let cone = SpherePoint::new(0.0, 0.0);
        assert_eq!(s2_partial_fourier(&cone, &table, 0, 0, 0, 0).unwrap().support().len(), 1);
        assert!(s2_partial_fourier(&cone, &table, 0, 1, 0, 0).is_err());
        // Lune boundaries are half-open.
        assert!(in_lune(&SpherePoint::new(1.0, PI / 6.0), 3));
        assert!(!in_lune(&SpherePoint::new(1.0, -PI / 6.0), 3));
        // Nonabelian generic orbit: orthonormal across irrep elements.
        let tt = irrep_table(&FiniteSubgroup::new(SubgroupTag::Tetrahedral).unwrap()).unwrap();
        let seed = SpherePoint::new(0.4, 0.2);
        let mut states = Vec::new();
        for (k, ir) in tt.irreps.iter().enumerate() {
            for mu in 0..ir.dim {
                for nu in 0..ir.dim {
                    states.push(s2_partial_fourier(&seed, &tt, 0, k, mu, nu).unwrap());
                }
            }
        }
        assert_eq!(states.len(), 12);
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b).norm() - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn recovery_in_lunes() {
        let code = build_sphere_code(SphereFamily::Cyclic(3)).unwrap();
        let rec = s2_recovery(&code).unwrap();
        let (c0, c1) = (c(0.6, 0.0), c(0.0, 0.8));
        let psi = code.logical_state(c0, c1).unwrap();
        let ident = rec.apply(&psi);
        assert!((ident.fidelity(c0, c1) - 1.0).abs() < 1e-12);
        for r in [Rotation::about_z(0.4), Rotation::from_axis_angle([1.0, 0.0, 0.0], 0.9).unwrap(), Rotation::from_euler(0.2, 0.5, -0.1)] {
            let out = rec.apply(&psi.rotate(&r));
            assert!((out.trace() - 1.0).abs() < 1e-12);
            assert!((out.fidelity(c0, c1) - 1.0).abs() < 1e-12, "{r:?}");
        }
        // Past the lune edge about ẑ the logical state is flipped.
        let out = rec.apply(&psi.rotate(&Rotation::about_z(PI / 3.0)));
        assert!((out.fidelity(c1, c0) - 1.0).abs() < 1e-12);
        // Cone points go to |+⟩.
        let pole = PointState::new(vec![(SpherePoint::new(0.0, 0.0), c(1.0, 0.0))]).unwrap();
        let out = rec.apply(&pole);
        let s = c(1.0 / 2f64.sqrt(), 0.0);
        assert!((out.fidelity(s, s) - 1.0).abs() < 1e-12);
        assert!(s2_recovery(&build_sphere_code(SphereFamily::Tetrahedral).unwrap()).is_err());
        for h in 0..6 {
            let p = SpherePoint::new(0.8, 0.1 + PI * h as f64 / 3.0);
            let (seed, r, hh) = rec.locate(&p);
            let back = seed.rotate(&Rotation::about_z(TAU * hh as f64 / 3.0));
            let back = if r == 1 { back.antipode() } else { back };
            assert!(close(&back, &p));
        }
    }

    #[test]
    fn overcomplete_frame_pieces() {
        // ∫dR f(Rŵ) = 2π ∫dv̂ f(v̂) for band-limited f, and the addition theorem.
        let haar = haar_quadrature(6);
        let sph = sphere_quadrature(6);
        let w = SpherePoint::new(0.9, 1.3);
        let f = |p: &SpherePoint| spherical_harmonic(2, 1, p) * spherical_harmonic(1, -1, p).conj() + spherical_harmonic(0, 0, p);
        let lhs = haar.integrate(|r| f(&w.rotate(r)));
        let rhs = sph.integrate(|p| f(p)) * TAU;
        assert!((lhs - rhs).norm() < 1e-10);
        let u = SpherePoint::new(2.1, -0.4);
        let dot: f64 = w.to_vec().iter().zip(u.to_vec().iter()).map(|(a, b)| a * b).sum();
        for l in 0..5usize {
            let s: Complex64 = (-(l as i64)..=(l as i64))
                .map(|m| spherical_harmonic(l, m, &w) * spherical_harmonic(l, m, &u).conj())
                .sum();
            let p_l = spherical_harmonic(l, 0, &SpherePoint::new(dot.acos(), 0.0)).re * (4.0 * PI / (2 * l + 1) as f64).sqrt();
            assert!((s.re - (2 * l + 1) as f64 / (4.0 * PI) * p_l).abs() < 1e-12 && s.im.abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn parity_commutes_with_rotations(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_points(&mut rng, 3);
            let r = Rotation::haar_random(&mut rng);
            prop_assert!(psi.parity().rotate(&r).distance(&psi.rotate(&r).parity()) < 1e-10);
        }
    }
}
