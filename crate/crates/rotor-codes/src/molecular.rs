//! Rigid-rotor (SO(3)) codes.
//!
//! Ideal codewords are finite superpositions of orientation eigenstates and
//! are handled as [`FrameState`]s with counting normalisation: two point
//! supports overlap only where their rotations coincide. Damped codewords
//! live in a truncated momentum space as [`MomentumState`]s, with
//! `⟨R|ℓ,m,n⟩ = √((2ℓ+1)/8π²) D^ℓ_{mn}(R)`.

use std::f64::consts::{PI, TAU};

use nalgebra as na;
use num_complex::Complex64;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reps::IrrepTable;
use crate::rotations::{
    cosets, omega_max, snap_to_orbit, CosetTable, FiniteSubgroup, Rotation, SubgroupTag, MATCH_TOL,
};
use crate::wigner::{cg_series, d_product_expand, gauss_legendre, wigner_d, wigner_d_element};

/// Default momentum cutoff `⌈6/Δ⌉` for damped states.
pub fn default_l_max(delta: f64) -> usize {
    (6.0 / delta).ceil() as usize
}

/// Which side a rotation acts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `|g⟩ → |Sg⟩`.
    Active,
    /// `|g⟩ → |gS⁻¹⟩`.
    Passive,
}

// ---------------------------------------------------------------------------
// Frame states

/// A finite superposition `Σ a_g |g⟩` of orientation eigenstates.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameState {
    support: Vec<(Rotation, Complex64)>,
}

impl FrameState {
    /// Merges coincident rotations; does not normalise.
    pub fn unnormalized(points: Vec<(Rotation, Complex64)>) -> Self {
        let mut support: Vec<(Rotation, Complex64)> = Vec::with_capacity(points.len());
        for (r, a) in points {
            match support.iter_mut().find(|(s, _)| s.approx_eq(&r, MATCH_TOL)) {
                Some(slot) => slot.1 += a,
                None => support.push((r, a)),
            }
        }
        FrameState { support }
    }

    pub fn new(points: Vec<(Rotation, Complex64)>) -> Result<Self> {
        Self::unnormalized(points).normalized()
    }

    pub fn point(r: Rotation) -> Self {
        FrameState { support: vec![(r, Complex64::new(1.0, 0.0))] }
    }

    pub fn support(&self) -> &[(Rotation, Complex64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.support.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 1e-300) {
            return Err(Error::InvalidArgument("frame state has zero norm".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn amplitude_at(&self, r: &Rotation) -> Complex64 {
        self.support
            .iter()
            .find(|(s, _)| s.approx_eq(r, MATCH_TOL))
            .map(|p| p.1)
            .unwrap_or_else(Complex64::zero)
    }

    /// `⟨self|other⟩` with point matching.
    pub fn inner(&self, other: &FrameState) -> Complex64 {
        self.support.iter().map(|(r, a)| a.conj() * other.amplitude_at(r)).sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        FrameState { support: self.support.iter().map(|(r, a)| (*r, a * c)).collect() }
    }

    pub fn add(&self, other: &FrameState) -> Self {
        let mut pts = self.support.clone();
        pts.extend_from_slice(&other.support);
        Self::unnormalized(pts)
    }

    pub fn rotate(&self, s: &Rotation, side: Side) -> Self {
        let inv = s.inverse();
        let support = self
            .support
            .iter()
            .map(|(g, a)| match side {
                Side::Active => (s.compose(g), *a),
                Side::Passive => (g.compose(&inv), *a),
            })
            .collect();
        FrameState { support }
    }

    /// Multiplies each amplitude by `f(g)`.
    pub fn multiply(&self, f: impl Fn(&Rotation) -> Complex64) -> Self {
        FrameState { support: self.support.iter().map(|(g, a)| (*g, a * f(g))).collect() }
    }

    /// The momentum kick `D̂^ℓ_{mn}`.
    pub fn kick(&self, ell: usize, m: i64, n: i64) -> Self {
        self.multiply(|g| wigner_d_element(ell, m, n, g))
    }

    /// Largest amplitude difference after point matching.
    pub fn distance(&self, other: &FrameState) -> f64 {
        let a = self.support.iter().map(|(r, x)| (x - other.amplitude_at(r)).norm());
        let b = other
            .support
            .iter()
            .filter(|(r, _)| !self.support.iter().any(|(s, _)| s.approx_eq(r, MATCH_TOL)))
            .map(|(_, x)| x.norm());
        a.chain(b).fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Momentum states

fn block_offset(l: usize) -> usize {
    if l == 0 {
        0
    } else {
        l * (2 * l - 1) * (2 * l + 1) / 3
    }
}

/// Coefficients `c^ℓ_{mn}` for `ℓ ≤ l_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState {
    l_max: usize,
    coeffs: Vec<Complex64>,
}

/// Result of a momentum kick in truncated space.
#[derive(Clone, Debug)]
pub struct KickResult {
    pub state: MomentumState,
    /// Squared norm of the components pushed above `l_max`.
    pub dropped: f64,
}

impl MomentumState {
    pub fn zeros(l_max: usize) -> Self {
        MomentumState { l_max, coeffs: vec![Complex64::zero(); block_offset(l_max + 1)] }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    fn index(&self, l: usize, m: i64, n: i64) -> usize {
        let li = l as i64;
        block_offset(l) + ((m + li) * (2 * li + 1) + (n + li)) as usize
    }

    fn valid(&self, l: usize, m: i64, n: i64) -> bool {
        l <= self.l_max && m.unsigned_abs() as usize <= l && n.unsigned_abs() as usize <= l
    }

    pub fn get(&self, l: usize, m: i64, n: i64) -> Complex64 {
        if self.valid(l, m, n) {
            self.coeffs[self.index(l, m, n)]
        } else {
            Complex64::zero()
        }
    }

    pub fn set(&mut self, l: usize, m: i64, n: i64, c: Complex64) -> Result<()> {
        if !self.valid(l, m, n) {
            return Err(Error::InvalidArgument(format!("no component ({l},{m},{n}) below l_max {}", self.l_max)));
        }
        let i = self.index(l, m, n);
        self.coeffs[i] = c;
        Ok(())
    }

    fn block(&self, l: usize) -> na::DMatrix<Complex64> {
        let d = 2 * l + 1;
        na::DMatrix::from_row_slice(d, d, &self.coeffs[block_offset(l)..block_offset(l + 1)])
    }

    fn set_block(&mut self, l: usize, b: &na::DMatrix<Complex64>) {
        let d = 2 * l + 1;
        let off = block_offset(l);
        for i in 0..d {
            for j in 0..d {
                self.coeffs[off + i * d + j] = b[(i, j)];
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 1e-300) {
            return Err(Error::Numerical("momentum state has zero norm".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        MomentumState { l_max: self.l_max, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// `⟨self|other⟩` over the common cutoff.
    pub fn inner(&self, other: &MomentumState) -> Complex64 {
        let n = block_offset(self.l_max.min(other.l_max) + 1);
        self.coeffs[..n].iter().zip(&other.coeffs[..n]).map(|(a, b)| a.conj() * b).sum()
    }

    /// Restriction to `ℓ ≤ l_max`.
    pub fn truncate(&self, l_max: usize) -> Self {
        let l_max = l_max.min(self.l_max);
        MomentumState { l_max, coeffs: self.coeffs[..block_offset(l_max + 1)].to_vec() }
    }

    /// Weight of each angular-momentum shell `Σ_{mn} |c^ℓ_{mn}|²`.
    pub fn shell_mass(&self) -> Vec<f64> {
        (0..=self.l_max)
            .map(|l| self.coeffs[block_offset(l)..block_offset(l + 1)].iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }

    /// Smallest `ℓ` such that shells `0..=ℓ` hold at least `fraction` of the norm.
    pub fn mass_cutoff(&self, fraction: f64) -> usize {
        cumulative_cutoff(&self.shell_mass(), fraction)
    }

    /// `⟨L̂²⟩ / ⟨1⟩`.
    pub fn mean_l_squared(&self) -> f64 {
        let m = self.shell_mass();
        let tot: f64 = m.iter().sum();
        m.iter().enumerate().map(|(l, w)| (l * (l + 1)) as f64 * w).sum::<f64>() / tot
    }

    /// The position wavefunction `ψ(R)`.
    pub fn evaluate(&self, r: &Rotation) -> Complex64 {
        let mut acc = Complex64::zero();
        for l in 0..=self.l_max {
            let d = wigner_d(l, r);
            let pre = ((2 * l + 1) as f64 / (8.0 * PI * PI)).sqrt();
            let b = self.block(l);
            acc += pre * b.iter().zip(d.as_matrix().iter()).map(|(c, x)| c * x).sum::<Complex64>();
        }
        acc
    }

    /// Active: `c'_{pn} = Σ_m D^{ℓ*}_{pm}(S) c_{mn}`. Passive: `c'_{mp} = Σ_n c_{mn} D^ℓ_{pn}(S)`.
    pub fn rotate(&self, s: &Rotation, side: Side) -> Self {
        let mut out = MomentumState::zeros(self.l_max);
        for l in 0..=self.l_max {
            let d = wigner_d(l, s).into_matrix();
            let b = self.block(l);
            let nb = match side {
                Side::Active => d.map(|z| z.conj()) * b,
                Side::Passive => b * d.transpose(),
            };
            out.set_block(l, &nb);
        }
        out
    }

    /// `D̂^ℓ_{mn}` via the Clebsch-Gordan product rule; the result is not renormalised.
    pub fn kick(&self, ell: usize, m: i64, n: i64) -> Result<KickResult> {
        if m.unsigned_abs() as usize > ell || n.unsigned_abs() as usize > ell {
            return Err(Error::InvalidArgument(format!("kick ({ell},{m},{n}) out of range")));
        }
        let top = self.l_max + ell;
        let mut wide = MomentumState::zeros(top);
        for j in 0..=self.l_max {
            let ji = j as i64;
            for p in -ji..=ji {
                for q in -ji..=ji {
                    let c = self.get(j, p, q);
                    if c == Complex64::zero() {
                        continue;
                    }
                    let (big_m, big_n) = (p + m, q + n);
                    for (big_l, coef) in d_product_expand(ell, m, n, j, p, q) {
                        if big_m.unsigned_abs() as usize > big_l || big_n.unsigned_abs() as usize > big_l {
                            continue;
                        }
                        let w = coef * ((2 * j + 1) as f64 / (2 * big_l + 1) as f64).sqrt();
                        let i = wide.index(big_l, big_m, big_n);
                        wide.coeffs[i] += c * w;
                    }
                }
            }
        }
        let dropped = wide.coeffs[block_offset(self.l_max + 1)..].iter().map(|c| c.norm_sqr()).sum();
        Ok(KickResult { state: wide.truncate(self.l_max), dropped })
    }
}

fn cumulative_cutoff(mass: &[f64], fraction: f64) -> usize {
    let tot: f64 = mass.iter().sum();
    let mut acc = 0.0;
    for (l, w) in mass.iter().enumerate() {
        acc += w;
        if acc >= fraction * tot {
            return l;
        }
    }
    mass.len().saturating_sub(1)
}

/// Unnormalised coefficients `√((2ℓ+1)/8π²) Σ_g a_g D^{ℓ*}_{mn}(g) e^{−Δ²ℓ(ℓ+1)/2}`.
pub fn frame_coefficients(state: &FrameState, l_max: usize, delta: f64) -> Result<MomentumState> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("damping Δ = {delta} must be non-negative")));
    }
    let mut out = MomentumState::zeros(l_max);
    for l in 0..=l_max {
        let pre = ((2 * l + 1) as f64 / (8.0 * PI * PI)).sqrt() * (-0.5 * delta * delta * (l * (l + 1)) as f64).exp();
        let d = 2 * l + 1;
        let mut b = na::DMatrix::<Complex64>::zeros(d, d);
        for (g, a) in state.support() {
            b += wigner_d(l, g).as_matrix().map(|z| z.conj() * a);
        }
        out.set_block(l, &(b * Complex64::new(pre, 0.0)));
    }
    Ok(out)
}

/// The damped, normalised momentum-space image of a frame state.
pub fn frame_to_momentum(state: &FrameState, l_max: usize, delta: f64) -> Result<MomentumState> {
    frame_coefficients(state, l_max, delta)?.normalized()
}

// ---------------------------------------------------------------------------
// Codes

/// The subgroup pair of a code and its dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CodeSpec {
    pub h: SubgroupTag,
    pub k: SubgroupTag,
    pub space: &'static str,
    pub d: usize,
}

/// Codewords `|r̄⟩ = |H|^{-1/2} Σ_{h∈H} |r·h⟩`, one per coset of `H` in `K`.
#[derive(Clone, Debug)]
pub struct MolecularCode {
    pub h: FiniteSubgroup,
    pub k: FiniteSubgroup,
    pub cosets: CosetTable,
    pub codewords: Vec<FrameState>,
}

pub fn build_molecular_code(h: SubgroupTag, k: SubgroupTag) -> Result<MolecularCode> {
    let hg = FiniteSubgroup::new(h)?;
    let kg = FiniteSubgroup::new(k)?;
    let table = cosets(&kg, &hg)?;
    let amp = Complex64::new(1.0 / (hg.order() as f64).sqrt(), 0.0);
    let codewords = table
        .members
        .iter()
        .map(|idx| FrameState::unnormalized(idx.iter().map(|&i| (*kg.element(i), amp)).collect()))
        .collect();
    Ok(MolecularCode { h: hg, k: kg, cosets: table, codewords })
}

impl MolecularCode {
    pub fn dim(&self) -> usize {
        self.codewords.len()
    }

    pub fn spec(&self) -> CodeSpec {
        CodeSpec { h: self.h.tag(), k: self.k.tag(), space: "SO3", d: self.dim() }
    }

    /// `N` when the code is `Z_N ⊂ Z_{2N}`.
    pub fn cyclic_order(&self) -> Option<usize> {
        match (self.h.tag(), self.k.tag()) {
            (SubgroupTag::Cyclic(n), SubgroupTag::Cyclic(m)) if m == 2 * n => Some(n),
            _ => None,
        }
    }

    fn require_cyclic(&self) -> Result<usize> {
        self.cyclic_order()
            .ok_or_else(|| Error::Unsupported(format!("{} ⊂ {} is not a Z_N ⊂ Z_2N code", self.h.tag(), self.k.tag())))
    }

    pub fn logical_state(&self, coeffs: &[Complex64]) -> Result<FrameState> {
        if coeffs.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("expected {} logical amplitudes", self.dim())));
        }
        let mut acc = FrameState::unnormalized(Vec::new());
        for (c, w) in coeffs.iter().zip(&self.codewords) {
            acc = acc.add(&w.scale(*c));
        }
        acc.normalized()
    }

    /// `⟨r̄|ψ⟩` for each codeword.
    pub fn decode_logical(&self, state: &FrameState) -> Vec<Complex64> {
        self.codewords.iter().map(|c| c.inner(state)).collect()
    }

    /// Relative phase picked up by codeword `r` under a kick, measured against
    /// codeword 0 carried to coset `r` by its representative.
    pub fn codeword_phase(&self, r: usize, ell: usize, m: i64, n: i64) -> Result<Complex64> {
        let rep = self
            .cosets
            .representatives
            .get(r)
            .ok_or_else(|| Error::InvalidArgument(format!("no codeword {r}")))?;
        let k0 = self.codewords[0].kick(ell, m, n);
        let norm = k0.norm_sqr();
        if norm < 1e-24 {
            return Err(Error::InvalidArgument("kick annihilates the code space".into()));
        }
        let moved = k0.rotate(rep, Side::Active);
        Ok(moved.inner(&self.codewords[r].kick(ell, m, n)) / norm)
    }
}

/// Generalised Zak state `√(d_λ/|H|) Σ_h ρ^λ_{μν}(h) |a·h⟩`.
pub fn zak_state(a: &Rotation, table: &IrrepTable, irrep: usize, mu: usize, nu: usize) -> Result<FrameState> {
    let ir = table
        .irreps
        .get(irrep)
        .ok_or_else(|| Error::InvalidArgument(format!("no irrep {irrep}")))?;
    if mu >= ir.dim || nu >= ir.dim {
        return Err(Error::InvalidArgument(format!("irrep indices ({mu},{nu}) exceed dimension {}", ir.dim)));
    }
    let h = &table.group;
    let pre = (ir.dim as f64 / h.order() as f64).sqrt();
    let pts = h
        .elements()
        .iter()
        .zip(&ir.matrices)
        .map(|(e, mat)| (a.compose(e), mat[(mu, nu)] * pre))
        .collect();
    Ok(FrameState::unnormalized(pts))
}

// ---------------------------------------------------------------------------
// Knill-Laflamme conditions

/// A single error operator acting on frame states.
#[derive(Clone, Debug, PartialEq)]
pub enum ErrorOp {
    Identity,
    /// Active position shift `X⃗_R`.
    Rotation(Rotation),
    Kick { ell: usize, m: i64, n: i64 },
}

impl ErrorOp {
    pub fn apply(&self, s: &FrameState) -> FrameState {
        match self {
            ErrorOp::Identity => s.clone(),
            ErrorOp::Rotation(r) => s.rotate(r, Side::Active),
            ErrorOp::Kick { ell, m, n } => s.kick(*ell, *m, *n),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ErrorOp::Identity => "I".into(),
            ErrorOp::Rotation(r) => {
                let [w, x, y, z] = r.quaternion();
                format!("X[{w:.6},{x:.6},{y:.6},{z:.6}]")
            }
            ErrorOp::Kick { ell, m, n } => format!("D^{ell}_{{{m},{n}}}"),
        }
    }
}

/// Every kick `D̂^ℓ_{mn}` with `ℓ ≤ l_max`.
pub fn kicks_upto(l_max: usize) -> Vec<(usize, i64, i64)> {
    (0..=l_max).flat_map(kicks_of).collect()
}

pub fn kicks_of(ell: usize) -> Vec<(usize, i64, i64)> {
    let l = ell as i64;
    (-l..=l).flat_map(|m| (-l..=l).map(move |n| (ell, m, n))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlCondition {
    /// `⟨ī|E†E′|j̄⟩ ≠ 0` for some `i ≠ j`.
    OffDiagonal,
    /// `⟨ī|E†E′|ī⟩` depends on `i`.
    Diagonal,
}

#[derive(Clone, Debug, Serialize)]
pub struct KlViolation {
    pub first: String,
    pub second: String,
    pub condition: KlCondition,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KlReport {
    pub errors: Vec<String>,
    pub pairs_checked: usize,
    pub violations: Vec<KlViolation>,
    pub max_violation: f64,
}

impl KlReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const KL_TOL: f64 = 1e-10;

/// Checks `⟨ī|E†E′|j̄⟩ = c(E,E′) δ_{ij}` over all pairs drawn from the
/// identity, the given position shifts and the given kicks.
pub fn kl_check(code: &MolecularCode, rotations: &[Rotation], kicks: &[(usize, i64, i64)]) -> KlReport {
    let mut ops = vec![ErrorOp::Identity];
    ops.extend(rotations.iter().map(|r| ErrorOp::Rotation(*r)));
    ops.extend(kicks.iter().map(|&(ell, m, n)| ErrorOp::Kick { ell, m, n }));
    kl_check_ops(&code.codewords, &ops)
}

/// Knill-Laflamme check for an arbitrary list of error operators.
pub fn kl_check_ops(codewords: &[FrameState], ops: &[ErrorOp]) -> KlReport {
    let images: Vec<Vec<FrameState>> = ops.iter().map(|e| codewords.iter().map(|c| e.apply(c)).collect()).collect();
    kl_from_images(ops.iter().map(|e| e.label()).collect(), &images, |a, b| a.inner(b))
}

/// Evaluates the Knill-Laflamme conditions given `images[e][i] = E_e|ī⟩`.
pub(crate) fn kl_from_images<S: Sync>(
    labels: Vec<String>,
    images: &[Vec<S>],
    inner: impl Fn(&S, &S) -> Complex64 + Sync,
) -> KlReport {
    let n_ops = images.len();
    let pairs: Vec<(usize, usize)> = (0..n_ops).flat_map(|a| (a..n_ops).map(move |b| (a, b))).collect();
    let found: Vec<Vec<KlViolation>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let d = images[a].len();
            let mut out = Vec::new();
            let mut off = 0.0f64;
            let mut diag = Vec::with_capacity(d);
            for i in 0..d {
                for j in 0..d {
                    let v = inner(&images[a][i], &images[b][j]);
                    if i == j {
                        diag.push(v);
                    } else {
                        off = off.max(v.norm());
                    }
                }
            }
            let spread = diag.iter().map(|v| (v - diag[0]).norm()).fold(0.0, f64::max);
            for (cond, mag) in [(KlCondition::OffDiagonal, off), (KlCondition::Diagonal, spread)] {
                if mag > KL_TOL {
                    out.push(KlViolation { first: labels[a].clone(), second: labels[b].clone(), condition: cond, magnitude: mag });
                }
            }
            out
        })
        .collect();
    let violations: Vec<KlViolation> = found.into_iter().flatten().collect();
    let max_violation = violations.iter().map(|v| v.magnitude).fold(0.0, f64::max);
    KlReport { errors: labels, pairs_checked: pairs.len(), violations, max_violation }
}

/// `⟨r̄|D̂^ℓ_{mn}|r̄′⟩` by point-matched frame sums.
pub fn frame_kick_matrix(code: &MolecularCode, ell: usize, m: i64, n: i64) -> na::DMatrix<Complex64> {
    let d = code.dim();
    let kicked: Vec<FrameState> = code.codewords.iter().map(|c| c.kick(ell, m, n)).collect();
    na::DMatrix::from_fn(d, d, |i, j| code.codewords[i].inner(&kicked[j]))
}

/// `⟨r̄|D̂^ℓ_{mn}|r̄′⟩ = δ_{rr′} [D^ℓ(r) Z^ℓ(H)]_{mn}` with `Z^ℓ(H)` the twirl over `H`.
pub fn coset_average_matrix(code: &MolecularCode, ell: usize, m: i64, n: i64) -> na::DMatrix<Complex64> {
    let z = crate::reps::twirl_d(ell, &code.h);
    let l = ell as i64;
    let d = code.dim();
    let mut out = na::DMatrix::zeros(d, d);
    for (r, rep) in code.cosets.representatives.iter().enumerate() {
        let dr = wigner_d(ell, rep).into_matrix() * &z;
        out[(r, r)] = dr[((m + l) as usize, (n + l) as usize)];
    }
    out
}

/// The same matrix from undamped codewords truncated at `l_max`, normalised
/// by the truncated norm of codeword 0. Converges like `1/l_max`.
pub fn truncated_kick_matrix(code: &MolecularCode, ell: usize, m: i64, n: i64, l_max: usize) -> Result<na::DMatrix<Complex64>> {
    let states: Vec<MomentumState> =
        code.codewords.iter().map(|c| frame_coefficients(c, l_max, 0.0)).collect::<Result<_>>()?;
    let kicked: Vec<MomentumState> = states.iter().map(|s| Ok(s.kick(ell, m, n)?.state)).collect::<Result<_>>()?;
    let norm = states[0].norm_sqr();
    let d = code.dim();
    Ok(na::DMatrix::from_fn(d, d, |i, j| states[i].inner(&kicked[j]) / norm))
}

// ---------------------------------------------------------------------------
// Recovery

/// Outcome of position decoding.
#[derive(Clone, Debug)]
pub struct PositionDecode {
    /// The estimated shift `S̃`.
    pub estimate: Rotation,
    pub corrected: FrameState,
    /// Set when a support point sits on a Voronoi boundary of `K`.
    pub boundary: bool,
}

/// Estimates a left rotation `S̃` from the support of a corrupted code state and
/// undoes it.
pub fn decode_position(corrupted: &FrameState, code: &MolecularCode) -> Result<PositionDecode> {
    let mut estimate: Option<Rotation> = None;
    let mut boundary = false;
    for (p, a) in corrupted.support() {
        if a.norm() < 1e-14 {
            continue;
        }
        let (c, _) = snap_to_orbit(p, &code.k);
        let mut ws: Vec<f64> = code.k.elements().iter().map(|g| p.compose(&g.inverse()).quaternion()[0].abs()).collect();
        ws.sort_by(|x, y| y.total_cmp(x));
        if ws.len() > 1 && ws[0] - ws[1] < 1e-9 {
            boundary = true;
        }
        match &estimate {
            None => estimate = Some(c),
            Some(e) if !e.approx_eq(&c, 1e-7) => {
                return Err(Error::AmbiguousSyndrome("support points disagree on the position shift".into()))
            }
            _ => {}
        }
    }
    let estimate = estimate.ok_or_else(|| Error::InvalidArgument("empty state".into()))?;
    let corrected = corrupted.rotate(&estimate.inverse(), Side::Active);
    Ok(PositionDecode { estimate, corrected, boundary })
}

/// `e^{−im(α+γ)}`, the diagonal extension of `U_m|R_{ω,ẑ}⟩ = e^{−imω}|R_{ω,ẑ}⟩`.
pub fn recovery_phase(m: i64, r: &Rotation) -> Complex64 {
    let [w, _, _, z] = r.quaternion();
    Complex64::from_polar(1.0, -(m as f64) * 2.0 * z.atan2(w))
}

/// A momentum recovery `U_m` chosen from a syndrome `λ`.
#[derive(Clone, Debug, Serialize)]
pub struct MomentumRecovery {
    pub lambda: usize,
    pub m: i64,
    /// Both minimal candidates when `N` is even and `λ = N/2`.
    pub candidates: Vec<i64>,
    pub tie: bool,
}

impl MomentumRecovery {
    pub fn apply(&self, s: &FrameState) -> FrameState {
        s.multiply(|g| recovery_phase(self.m, g))
    }
}

pub fn decode_momentum(lambda: usize, code: &MolecularCode) -> Result<MomentumRecovery> {
    let n = code.require_cyclic()? as i64;
    let l = lambda as i64;
    if l >= n {
        return Err(Error::InvalidArgument(format!("syndrome {lambda} out of range for N = {n}")));
    }
    let r = l.rem_euclid(n);
    let (m, candidates, tie) = if 2 * r == n {
        (r, vec![r, r - n], true)
    } else if 2 * r > n {
        (r - n, vec![r - n], false)
    } else {
        (r, vec![r], false)
    };
    Ok(MomentumRecovery { lambda, m, candidates, tie })
}

/// Eigenvalue of `S_X = L⃗_{2π/N,ẑ}`, returned as `λ` with `S_X = e^{i2πλ/N}`.
pub fn momentum_syndrome(state: &FrameState, code: &MolecularCode) -> Result<usize> {
    let n = code.require_cyclic()?;
    let sx = state.rotate(&Rotation::about_z(TAU / n as f64), Side::Passive);
    let norm = state.norm_sqr();
    let ev = state.inner(&sx) / norm;
    let residual = sx.add(&state.scale(-ev)).norm_sqr().sqrt();
    if (ev.norm() - 1.0).abs() > 1e-9 || residual > 1e-9 * norm.sqrt() {
        return Err(Error::AmbiguousSyndrome("state is not an S_X eigenstate".into()));
    }
    let lam = (ev.arg() * n as f64 / TAU).round() as i64;
    Ok(lam.rem_euclid(n as i64) as usize)
}

// ---------------------------------------------------------------------------
// Check operators

#[derive(Clone, Debug, Serialize)]
pub struct CheckOperators {
    pub n: usize,
    /// `S_X = L⃗_{2π/N,ẑ}` as a passive rotation.
    pub s_x: [f64; 4],
    /// `S_Z = D̂^{2N}_{2N,2N}`.
    pub s_z: (usize, i64, i64),
    pub s_x_eigenvalues: Vec<[f64; 2]>,
    pub s_z_eigenvalues: Vec<[f64; 2]>,
    /// `max |S_X|a;λ⟩ − e^{i2πλ/N}|a;λ⟩|` over partial-Fourier states.
    pub zak_defect: f64,
    /// `max |L⃗ D̂ + D̂ L⃗|ψ⟩|` for `D̂ = D̂^N_{NN}`, `L⃗ = L⃗_{π/N,ẑ}` on random states.
    pub anticommutation_defect: f64,
    /// `max |D^N_{NN}(α,β,γ+π/N) + D^N_{NN}(α,β,γ)|` at random angles.
    pub shift_identity_defect: f64,
}

impl CheckOperators {
    pub fn certified(&self) -> bool {
        let one = |v: &Vec<[f64; 2]>| v.iter().all(|z| (z[0] - 1.0).abs() < 1e-10 && z[1].abs() < 1e-10);
        one(&self.s_x_eigenvalues)
            && one(&self.s_z_eigenvalues)
            && self.zak_defect < 1e-10
            && self.anticommutation_defect < 1e-10
            && self.shift_identity_defect < 1e-10
    }
}

pub fn check_operators(code: &MolecularCode, seed: u64) -> Result<CheckOperators> {
    let n = code.require_cyclic()?;
    let sx = Rotation::about_z(TAU / n as f64);
    let (l2, m2) = (2 * n, 2 * n as i64);
    let eig = |f: &dyn Fn(&FrameState) -> FrameState| -> Vec<[f64; 2]> {
        code.codewords
            .iter()
            .map(|c| {
                let v = c.inner(&f(c)) / c.norm_sqr();
                [v.re, v.im]
            })
            .collect()
    };
    let s_x_eigenvalues = eig(&|c| c.rotate(&sx, Side::Passive));
    let s_z_eigenvalues = eig(&|c| c.kick(l2, m2, m2));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = crate::reps::irrep_table(&code.h)?;
    let mut zak_defect = 0.0f64;
    for lam in 0..n {
        let a = Rotation::haar_random(&mut rng);
        let z = zak_state(&a, &table, lam, 0, 0)?;
        let want = z.scale(Complex64::from_polar(1.0, TAU * lam as f64 / n as f64));
        zak_defect = zak_defect.max(z.rotate(&sx, Side::Passive).distance(&want));
    }

    let half = Rotation::about_z(PI / n as f64);
    let ni = n as i64;
    let mut anticommutation_defect = 0.0f64;
    let mut shift_identity_defect = 0.0f64;
    for _ in 0..20 {
        let pts = (0..5)
            .map(|_| {
                let r = Rotation::haar_random(&mut rng);
                (r, Complex64::new(rand::Rng::gen_range(&mut rng, -1.0..1.0), rand::Rng::gen_range(&mut rng, -1.0..1.0)))
            })
            .collect();
        let psi = FrameState::new(pts)?;
        let a = psi.kick(n, ni, ni).rotate(&half, Side::Passive);
        let b = psi.rotate(&half, Side::Passive).kick(n, ni, ni);
        anticommutation_defect = anticommutation_defect.max(a.add(&b).distance(&FrameState::unnormalized(Vec::new())));
        let (al, be, ga) = (
            rand::Rng::gen_range(&mut rng, 0.0..TAU),
            rand::Rng::gen_range(&mut rng, 0.0..PI),
            rand::Rng::gen_range(&mut rng, 0.0..TAU),
        );
        let x = wigner_d_element(n, ni, ni, &Rotation::from_euler(al, be, ga + PI / n as f64));
        let y = wigner_d_element(n, ni, ni, &Rotation::from_euler(al, be, ga));
        shift_identity_defect = shift_identity_defect.max((x + y).norm());
    }
    Ok(CheckOperators {
        n,
        s_x: sx.quaternion(),
        s_z: (l2, m2, m2),
        s_x_eigenvalues,
        s_z_eigenvalues,
        zak_defect,
        anticommutation_defect,
        shift_identity_defect,
    })
}

// ---------------------------------------------------------------------------
// Ancilla readout

/// `cos η |L,L⟩ + sin η |L,−L⟩`, index `s + L`.
pub fn ancilla_fiducial(spin: usize, eta: f64) -> Result<na::DVector<Complex64>> {
    if !(eta > 0.0 && eta < PI / 4.0) {
        return Err(Error::InvalidArgument(format!("η = {eta} must lie in (0, π/4)")));
    }
    let mut v = na::DVector::zeros(2 * spin + 1);
    v[2 * spin] = Complex64::new(eta.cos(), 0.0);
    v[0] += Complex64::new(eta.sin(), 0.0);
    Ok(v)
}

/// `|S̃⟩ = D^L(S̃)|fiducial⟩`.
pub fn ancilla_state(s: &Rotation, spin: usize, eta: f64) -> Result<na::DVector<Complex64>> {
    Ok(wigner_d(spin, s).into_matrix() * ancilla_fiducial(spin, eta)?)
}

/// `|⟨v̂|v̂′⟩|²` for spin-`j` coherent states, equal to `((1+v̂·v̂′)/2)^{2j}`.
pub fn spin_coherent_overlap(j: usize, v: [f64; 3], w: [f64; 3]) -> Result<f64> {
    let to_rot = |u: [f64; 3]| -> Result<Rotation> {
        let p = crate::rotations::SpherePoint::from_vec(u)?;
        Ok(Rotation::from_euler(p.phi, p.theta, 0.0))
    };
    let rel = to_rot(v)?.inverse().compose(&to_rot(w)?);
    let jj = j as i64;
    Ok(wigner_d_element(j, jj, jj, &rel).norm_sqr())
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariancePoint {
    pub k: usize,
    pub overlap: f64,
    /// Phase acquired by the fiducial under `R_{πk/N,ẑ}`.
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AncillaReadout {
    pub n: usize,
    pub spin: usize,
    pub eta: f64,
    pub estimate: [f64; 4],
    /// `|⟨fid|D^L(T)|fid⟩|` for each `T ∈ Z_{2N}`.
    pub invariance: Vec<InvariancePoint>,
    /// Largest `|⟨fid|D^L(T)|fid⟩|` over sampled `T ∉ Z_{2N}`.
    pub max_off_group: f64,
    /// `(t, |⟨S̃|S̃·R_{t,x̂}⟩|)` for `t` across the correctable window.
    pub kernel: Vec<(f64, f64)>,
}

/// Statistics of reading a position shift onto a spin-`L` ancilla via `crot`.
pub fn ancilla_position_readout(s_tilde: &Rotation, n: usize, spin: usize, eta: f64, samples: usize) -> Result<AncillaReadout> {
    if n == 0 || spin < n {
        return Err(Error::InvalidArgument(format!("spin {spin} must be at least N = {n}")));
    }
    let fid = ancilla_fiducial(spin, eta)?;
    let expect = |t: &Rotation| -> Complex64 { (fid.adjoint() * (wigner_d(spin, t).into_matrix() * &fid))[(0, 0)] };
    let invariance: Vec<InvariancePoint> = (0..2 * n)
        .map(|k| {
            let v = expect(&Rotation::about_z(PI * k as f64 / n as f64));
            InvariancePoint { k, overlap: v.norm(), phase: v.arg() }
        })
        .collect();
    if invariance.iter().any(|p| (p.overlap - 1.0).abs() > 1e-10) {
        return Err(Error::InvalidArgument("fiducial is not invariant under Z_2N".into()));
    }
    let z2n = FiniteSubgroup::new(SubgroupTag::Cyclic(2 * n))?;
    let mut probes: Vec<Rotation> = (0..2 * n).map(|k| Rotation::about_z(PI * (k as f64 + 0.5) / n as f64)).collect();
    probes.push(Rotation::from_axis_angle([1.0, 0.0, 0.0], PI)?);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    probes.extend((0..samples).map(|_| Rotation::haar_random(&mut rng)));
    let max_off_group = probes
        .iter()
        .filter(|r| z2n.elements().iter().all(|g| r.quat_distance(g) > 1e-6))
        .map(|r| expect(r).norm())
        .fold(0.0, f64::max);
    if max_off_group > 1.0 - 1e-12 {
        return Err(Error::InvalidArgument("fiducial has a larger invariance group than Z_2N".into()));
    }
    let here = ancilla_state(s_tilde, spin, eta)?;
    let window = PI / (2.0 * n as f64);
    let kernel = (0..=8)
        .map(|i| {
            let t = window * i as f64 / 8.0;
            let other = ancilla_state(&s_tilde.compose(&Rotation::from_axis_angle([1.0, 0.0, 0.0], t).expect("unit")), spin, eta)
                .expect("validated");
            (t, (here.adjoint() * other)[(0, 0)].norm())
        })
        .collect();
    Ok(AncillaReadout { n, spin, eta, estimate: s_tilde.quaternion(), invariance, max_off_group, kernel })
}

// ---------------------------------------------------------------------------
// Damped Z_N ⊂ Z_2N codewords: energy, leakage, distortion

fn shell_weight(l: usize, n: usize, delta: f64) -> f64 {
    (2 * l + 1) as f64 * (2 * (l / n) + 1) as f64 * (-delta * delta * (l * (l + 1)) as f64).exp()
}

/// Average momentum of the damped `Z_N ⊂ Z_2N` codewords.
#[derive(Clone, Debug, Serialize)]
pub struct MomentumStats {
    pub n: usize,
    pub delta: f64,
    pub l_max: usize,
    /// `⟨L̂²⟩^{1/2}` from the truncated sum.
    pub lbar_exact: f64,
    /// `√(3/(2Δ²) − 1/4)`.
    pub lbar_asym: f64,
    pub l2_mean: f64,
    pub l2_variance: f64,
    /// Smallest `ℓ` holding 99% of the momentum distribution.
    pub mass_99: usize,
}

pub fn avg_momentum(delta: f64, n: usize) -> Result<MomentumStats> {
    if !(delta > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("need Δ > 0 and N ≥ 1".into()));
    }
    let l_max = default_l_max(delta).max(4);
    let w: Vec<f64> = (0..=l_max).map(|l| shell_weight(l, n, delta)).collect();
    let tot: f64 = w.iter().sum();
    let l2 = |l: usize| (l * (l + 1)) as f64;
    let mean: f64 = w.iter().enumerate().map(|(l, x)| l2(l) * x).sum::<f64>() / tot;
    let second: f64 = w.iter().enumerate().map(|(l, x)| l2(l).powi(2) * x).sum::<f64>() / tot;
    let asym = 1.5 / (delta * delta) - 0.25;
    Ok(MomentumStats {
        n,
        delta,
        l_max,
        lbar_exact: mean.sqrt(),
        lbar_asym: asym.max(0.0).sqrt(),
        l2_mean: mean,
        l2_variance: second - mean * mean,
        mass_99: cumulative_cutoff(&w, 0.99),
    })
}

/// Quadrature resolution for the Voronoi-cell integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LeakageResolution {
    /// Gauss-Legendre nodes in `cos Θ` on each hemisphere.
    pub n_theta: usize,
    pub n_phi: usize,
    pub omega_panels: usize,
    pub n_omega: usize,
}

impl Default for LeakageResolution {
    fn default() -> Self {
        LeakageResolution { n_theta: 24, n_phi: 32, omega_panels: 6, n_omega: 16 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakageReport {
    pub n: usize,
    pub delta: f64,
    pub l_max: usize,
    /// Probability of landing in the cells of the correct codeword.
    pub p_own: f64,
    /// `P_leak`: probability of landing in the cells of the other codeword.
    pub p_leak: f64,
    /// `csc(π/2N) (Δ/√π) exp(−(π/2NΔ)²)`.
    pub asymptote: f64,
    /// `p_own + p_leak − 1`.
    pub certificate: f64,
}

/// `⟨R|e^{−Δ²L̂²/2}|1⟩` as a function of the rotation angle of `R`, given
/// the weights `(2ℓ+1) e^{−Δ²ℓ(ℓ+1)/2} / 8π²`.
fn damped_delta(omega: f64, weights: &[f64]) -> f64 {
    let half = 0.5 * omega;
    let s = half.sin();
    if s.abs() < 1e-8 {
        return weights.iter().enumerate().map(|(l, w)| w * (2 * l + 1) as f64).sum();
    }
    // sin((2ℓ+1)ω/2) by the Chebyshev recurrence.
    let c2 = 2.0 * omega.cos();
    let (mut prev, mut cur) = (-s, s);
    let mut acc = 0.0;
    for w in weights {
        acc += w * cur;
        let next = c2 * cur - prev;
        prev = cur;
        cur = next;
    }
    acc / s
}

/// Leakage of the damped codeword `|0̃⟩` of `Z_N ⊂ Z_2N` into the Voronoi cells
/// of `|1̄⟩`.
pub fn leakage_probability(n: usize, delta: f64, res: LeakageResolution) -> Result<LeakageReport> {
    if !(delta > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("need Δ > 0 and N ≥ 1".into()));
    }
    let l_max = (8.0 / delta).ceil() as usize;
    let h: Vec<Rotation> = (0..n).map(|k| Rotation::about_z(-TAU * k as f64 / n as f64)).collect();
    let weights: Vec<f64> = (0..=l_max)
        .map(|l| (2 * l + 1) as f64 * (-0.5 * delta * delta * (l * (l + 1)) as f64).exp() / (8.0 * PI * PI))
        .collect();
    let psi0 = |s: &Rotation| -> f64 { h.iter().map(|hi| damped_delta(s.compose(hi).angle(), &weights)).sum() };
    let shift = Rotation::about_z(PI / n as f64);

    let (xt, wt) = gauss_legendre(res.n_theta);
    let mut thetas = Vec::with_capacity(2 * res.n_theta);
    // cos Θ ∈ [0,1] and [−1,0], split at the kink of ω_max(Θ).
    for (x, w) in xt.iter().zip(&wt) {
        thetas.push(((0.5 * (x + 1.0)).acos(), 0.5 * w));
        thetas.push(((0.5 * (x - 1.0)).acos(), 0.5 * w));
    }
    let (xo, wo) = gauss_legendre(res.n_omega);
    let dphi = TAU / res.n_phi as f64;
    let parts: Vec<(f64, f64)> = thetas
        .par_iter()
        .map(|&(theta, wtheta)| {
            let top = omega_max(theta, 2 * n);
            let width = top / res.omega_panels as f64;
            let mut own = 0.0;
            let mut wrong = 0.0;
            for j in 0..res.n_phi {
                let phi = j as f64 * dphi;
                let axis = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
                for p in 0..res.omega_panels {
                    for (u, wu) in xo.iter().zip(&wo) {
                        let omega = width * (p as f64 + 0.5 * (u + 1.0));
                        let r = Rotation::from_axis_angle(axis, omega).expect("unit axis");
                        let w = wtheta * dphi * 0.5 * width * wu * 4.0 * (0.5 * omega).sin().powi(2);
                        own += w * psi0(&r).powi(2);
                        wrong += w * psi0(&shift.compose(&r)).powi(2);
                    }
                }
            }
            (own, wrong)
        })
        .collect();
    let (own, wrong) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let norm: f64 = (0..=l_max)
        .map(|l| (n * n) as f64 * shell_weight(l, n, delta) / (8.0 * PI * PI))
        .sum();
    let p_own = n as f64 * own / norm;
    let p_leak = n as f64 * wrong / norm;
    let x = PI / (2.0 * n as f64);
    Ok(LeakageReport {
        n,
        delta,
        l_max,
        p_own,
        p_leak,
        asymptote: delta / (PI.sqrt() * x.sin()) * (-(x / delta).powi(2)).exp(),
        certificate: p_own + p_leak - 1.0,
    })
}

/// Finds `Δ` in `[lo, hi]` with `P_leak(Δ) = target`.
///
/// `ln P_leak` is close to linear in `1/Δ²`, so regula falsi in that variable
/// (Illinois variant) converges in a handful of evaluations.
pub fn solve_delta_for_leakage(n: usize, target: f64, lo: f64, hi: f64, res: LeakageResolution) -> Result<f64> {
    if !(lo > 0.0 && hi > lo && target > 0.0) {
        return Err(Error::InvalidArgument("need 0 < lo < hi and a positive target".into()));
    }
    let f = |x: f64| -> Result<f64> { Ok(leakage_probability(n, 1.0 / x.sqrt(), res)?.p_leak.ln() - target.ln()) };
    let (mut a, mut b) = (1.0 / (hi * hi), 1.0 / (lo * lo));
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!("P_leak = {target} is not bracketed by Δ ∈ [{lo}, {hi}]")));
    }
    let mut side = 0;
    for _ in 0..60 {
        let x = (a * fb - b * fa) / (fb - fa);
        let fx = f(x)?;
        if fx.abs() < 1e-9 {
            return Ok(1.0 / x.sqrt());
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < 1e-10 * b {
            break;
        }
    }
    let x = 0.5 * (a + b);
    Ok(1.0 / x.sqrt())
}

/// One row of a `Δ` sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub lbar_exact: f64,
    pub lbar_asym: f64,
    pub pleak_num: f64,
    pub pleak_asym: f64,
}

/// Evaluates `ℓ̄` and `P_leak` at each `Δ`; rows keep the input order.
pub fn leakage_sweep(n: usize, deltas: &[f64], res: LeakageResolution) -> Result<Vec<SweepRow>> {
    deltas
        .par_iter()
        .map(|&d| {
            let m = avg_momentum(d, n)?;
            let p = leakage_probability(n, d, res)?;
            Ok(SweepRow { delta: d, lbar_exact: m.lbar_exact, lbar_asym: m.lbar_asym, pleak_num: p.p_leak, pleak_asym: p.asymptote })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paired samples".into()));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

#[derive(Clone, Debug, Serialize)]
pub struct DistortionReport {
    pub n: usize,
    pub delta: f64,
    pub ell: usize,
    pub l_max: usize,
    /// `⟨0̃|D̂^ℓ_{00}|1̃⟩` from the truncated Clebsch-Gordan sum.
    pub exact: f64,
    /// `2(2ℓ+1) exp(−(π/2NΔ)²)`; a heuristic, not a bound.
    pub heuristic: f64,
}

/// `⟨0̃|D̂^ℓ_{00}|1̃⟩` for the damped `Z_N ⊂ Z_2N` codewords.
pub fn distortion(n: usize, delta: f64, ell: usize) -> Result<DistortionReport> {
    if !(delta > 0.0) || n == 0 {
        return Err(Error::InvalidArgument("need Δ > 0 and N ≥ 1".into()));
    }
    if ell >= n {
        return Err(Error::InvalidArgument(format!("ℓ = {ell} must be below N = {n}")));
    }
    let l_max = default_l_max(delta);
    let damp = |l: usize| (-0.5 * delta * delta * (l * (l + 1)) as f64).exp();
    let norm: f64 = (0..=l_max).map(|l| shell_weight(l, n, delta)).sum();
    let pmax = (l_max / n) as i64;
    let mut acc = 0.0;
    for p in -pmax..=pmax {
        let m = p * n as i64;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let mut part = 0.0;
        for j in m.unsigned_abs() as usize..=l_max {
            let cg = cg_series(ell, 0, j, m);
            for (big_l, c) in cg.iter() {
                if big_l > l_max || (big_l as i64) < m.abs() {
                    continue;
                }
                part += (2 * j + 1) as f64 * c * c * damp(j) * damp(big_l);
            }
        }
        acc += sign * part;
    }
    Ok(DistortionReport {
        n,
        delta,
        ell,
        l_max,
        exact: acc / norm,
        heuristic: 2.0 * (2 * ell + 1) as f64 * (-(PI / (2.0 * n as f64 * delta)).powi(2)).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::irrep_table;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_frame(rng: &mut ChaCha8Rng, k: usize) -> FrameState {
        let pts = (0..k).map(|_| (Rotation::haar_random(rng), c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).collect();
        FrameState::new(pts).unwrap()
    }

    fn random_momentum(rng: &mut ChaCha8Rng, l_max: usize) -> MomentumState {
        let mut s = MomentumState::zeros(l_max);
        for x in s.coeffs.iter_mut() {
            *x = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        s.normalized().unwrap()
    }

    fn z3z6() -> MolecularCode {
        build_molecular_code(SubgroupTag::Cyclic(3), SubgroupTag::Cyclic(6)).unwrap()
    }

    #[test]
    fn codewords_of_standard_codes() {
        let code = z3z6();
        assert_eq!(code.dim(), 2);
        for (r, cw) in code.codewords.iter().enumerate() {
            for k in 0..3 {
                let want = Rotation::about_z(PI * (r + 2 * k) as f64 / 3.0);
                assert!((cw.amplitude_at(&want) - c(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-14);
            }
        }
        let ti = build_molecular_code(SubgroupTag::Tetrahedral, SubgroupTag::Icosahedral).unwrap();
        assert_eq!(ti.dim(), 5);
        assert!(ti.codewords.iter().all(|w| w.len() == 12));
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ti.codewords[i].inner(&ti.codewords[j]).re - want).abs() < 1e-12);
            }
        }
        let hh = build_molecular_code(SubgroupTag::Octahedral, SubgroupTag::Octahedral).unwrap();
        assert_eq!(hh.dim(), 1);
        assert!(build_molecular_code(SubgroupTag::Cyclic(4), SubgroupTag::Cyclic(6)).is_err());
    }

    #[test]
    fn momentum_image_of_cyclic_codewords() {
        let code = z3z6();
        for (r, cw) in code.codewords.iter().enumerate() {
            let s = frame_coefficients(cw, 7, 0.0).unwrap();
            let reference = s.get(3, 3, 3);
            for l in 0..=7usize {
                let li = l as i64;
                for m in -li..=li {
                    for n in -li..=li {
                        let v = s.get(l, m, n);
                        if m == n && m % 3 == 0 {
                            let p = m / 3;
                            let sign = if (p * r as i64) % 2 == 0 { 1.0 } else { -1.0 };
                            let want = 3.0 * ((2 * l + 1) as f64 / (8.0 * PI * PI)).sqrt() * sign / 3f64.sqrt();
                            assert!((v - c(want, 0.0)).norm() < 1e-12, "r={r} ({l},{m},{n})");
                        } else {
                            assert!(v.norm() < 1e-12);
                        }
                    }
                }
            }
            assert!(reference.norm() > 0.1);
        }
        // Logical-X states sit on even or odd multiples of N.
        let plus = code.logical_state(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let minus = code.logical_state(&[c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let sp = frame_coefficients(&plus, 9, 0.0).unwrap();
        let sm = frame_coefficients(&minus, 9, 0.0).unwrap();
        for m in -9i64..=9 {
            assert_eq!(sp.get(9, m, m).norm() > 1e-12, m % 6 == 0);
            assert_eq!(sm.get(9, m, m).norm() > 1e-12, m.rem_euclid(6) == 3);
        }
        // The identity maps to (2ℓ+1)-weighted δ_{mn}.
        let id = frame_coefficients(&FrameState::point(Rotation::identity()), 4, 0.0).unwrap();
        for l in 0..=4usize {
            for m in -(l as i64)..=(l as i64) {
                assert!((id.get(l, m, m).re - ((2 * l + 1) as f64 / (8.0 * PI * PI)).sqrt()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn momentum_evaluation_matches_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_momentum(&mut rng, 4);
        let r = Rotation::haar_random(&mut rng);
        let mut want = Complex64::zero();
        for l in 0..=4usize {
            let li = l as i64;
            for m in -li..=li {
                for n in -li..=li {
                    want += s.get(l, m, n) * ((2 * l + 1) as f64 / (8.0 * PI * PI)).sqrt() * wigner_d_element(l, m, n, &r);
                }
            }
        }
        assert!((s.evaluate(&r) - want).norm() < 1e-12);
    }

    #[test]
    fn rotations_in_both_pictures() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_momentum(&mut rng, 5);
        let (a, b) = (Rotation::haar_random(&mut rng), Rotation::haar_random(&mut rng));
        let r = Rotation::haar_random(&mut rng);
        // Active then passive equals passive then active.
        let x = s.rotate(&a, Side::Active).rotate(&b, Side::Passive);
        let y = s.rotate(&b, Side::Passive).rotate(&a, Side::Active);
        assert!((x.inner(&y).norm() - 1.0).abs() < 1e-10);
        // ψ'(R) = ψ(a⁻¹R) and ψ(Rb).
        let act = s.rotate(&a, Side::Active);
        assert!((act.evaluate(&r) - s.evaluate(&a.inverse().compose(&r))).norm() < 1e-10);
        let pas = s.rotate(&b, Side::Passive);
        assert!((pas.evaluate(&r) - s.evaluate(&r.compose(&b))).norm() < 1e-10);
        // Frame and momentum pictures agree.
        let f = random_frame(&mut rng, 3);
        let lhs = frame_coefficients(&f.rotate(&a, Side::Active).rotate(&b, Side::Passive), 4, 0.3).unwrap();
        let rhs = frame_coefficients(&f, 4, 0.3).unwrap().rotate(&a, Side::Active).rotate(&b, Side::Passive);
        assert!(lhs.coeffs.iter().zip(&rhs.coeffs).all(|(u, v)| (u - v).norm() < 1e-10));
        let same = s.rotate(&Rotation::identity(), Side::Active);
        assert!(same.coeffs.iter().zip(&s.coeffs).all(|(u, v)| (u - v).norm() < 1e-12));
    }

    #[test]
    fn logical_x_swaps_cyclic_codewords() {
        let code = z3z6();
        let x = Rotation::about_z(PI / 3.0);
        let swapped = code.codewords[0].rotate(&x, Side::Active);
        assert!(swapped.distance(&code.codewords[1]) < 1e-12);
        assert!(code.codewords[1].rotate(&x, Side::Active).distance(&code.codewords[0]) < 1e-12);
    }

    #[test]
    fn momentum_kick_matches_pointwise_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_momentum(&mut rng, 4);
        for (ell, m, n) in [(1usize, 0i64, 1i64), (2, -2, 1), (3, 1, -3)] {
            let k = s.kick(ell, m, n).unwrap();
            let mut wide = MomentumState::zeros(4 + ell);
            wide.coeffs[..s.coeffs.len()].copy_from_slice(&s.coeffs);
            let full = wide.kick(ell, m, n).unwrap();
            assert!(full.dropped < 1e-20);
            for _ in 0..3 {
                let r = Rotation::haar_random(&mut rng);
                let want = s.evaluate(&r) * wigner_d_element(ell, m, n, &r);
                assert!((full.state.evaluate(&r) - want).norm() < 1e-10);
            }
            let kept = k.state.norm_sqr();
            assert!((kept + k.dropped - full.state.norm_sqr()).abs() < 1e-10);
        }
        let same = s.kick(0, 0, 0).unwrap().state;
        assert!(same.coeffs.iter().zip(&s.coeffs).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn kicks_on_cyclic_codewords() {
        let code = z3z6();
        let table = irrep_table(&code.h).unwrap();
        for (ell, m) in [(1usize, 1i64), (2, 2), (1, -1), (3, 0)] {
            let kicked = code.codewords[0].kick(ell, m, m);
            let lam = m.rem_euclid(3) as usize;
            let zak = zak_state(&Rotation::identity(), &table, lam, 0, 0).unwrap();
            assert!(kicked.distance(&zak) < 1e-12);
            let ph = code.codeword_phase(1, ell, m, m).unwrap();
            assert!((ph - Complex64::from_polar(1.0, PI * m as f64 / 3.0)).norm() < 1e-12);
        }
        // Off-diagonal kicks annihilate ẑ-rotation codewords.
        assert!(code.codewords[0].kick(2, 1, 0).norm_sqr() < 1e-24);
        let w1 = code.codeword_phase(1, 1, -1, -1).unwrap();
        let w2 = code.codeword_phase(1, 2, 2, 2).unwrap();
        assert!((w1 - Complex64::from_polar(1.0, -PI / 3.0)).norm() < 1e-12);
        assert!((w2 - Complex64::from_polar(1.0, 2.0 * PI / 3.0)).norm() < 1e-12);
        let zero = code.codewords[0].kick(0, 0, 0);
        assert!(zero.distance(&code.codewords[0]) < 1e-14);
    }

    #[test]
    fn kl_conditions() {
        let code = z3z6();
        assert!(kl_check(&code, &[], &kicks_upto(1)).passed());
        let bad = kl_check(&code, &[], &[(1, -1, -1), (2, 2, 2)]);
        assert!(!bad.passed());
        assert!(bad.violations.iter().any(|v| v.first.contains("D^1") && v.second.contains("D^2")));
        assert!(kl_check(&code, &[], &[]).passed());
        let to = build_molecular_code(SubgroupTag::Tetrahedral, SubgroupTag::Octahedral).unwrap();
        assert!(kl_check(&to, &[], &kicks_upto(1)).passed());
        let r3 = kl_check(&to, &[], &kicks_of(3));
        assert!(!r3.passed());
        // Some ℓ = 3 kick has unequal diagonal elements against the identity.
        assert!(r3.violations.iter().any(|v| v.first == "I" && v.condition == KlCondition::Diagonal));
        // Small rotations are correctable for Z3 ⊂ Z6.
        let rots = [Rotation::about_z(0.2), Rotation::from_axis_angle([1.0, 0.3, 0.0], 0.1).unwrap()];
        assert!(kl_check(&code, &rots, &[]).passed());
    }

    #[test]
    fn kick_matrices_three_ways() {
        for (h, k) in [(SubgroupTag::Cyclic(3), SubgroupTag::Cyclic(6)), (SubgroupTag::Dihedral(3), SubgroupTag::Dihedral(6))] {
            let code = build_molecular_code(h, k).unwrap();
            for (ell, m, n) in [(2usize, 0i64, 0i64), (3, 3, 3), (3, 1, -2)] {
                let a = frame_kick_matrix(&code, ell, m, n);
                let b = coset_average_matrix(&code, ell, m, n);
                assert!((&a - &b).iter().all(|z| z.norm() < 1e-12));
                let errs: Vec<f64> = [8usize, 12, 16]
                    .iter()
                    .map(|&l| (truncated_kick_matrix(&code, ell, m, n, l).unwrap() - &a).iter().map(|z| z.norm()).fold(0.0, f64::max))
                    .collect();
                assert!(errs[1] <= errs[0] + 1e-12 && errs[2] <= errs[1] + 1e-12, "{errs:?}");
            }
        }
    }

    #[test]
    fn weyl_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = random_frame(&mut rng, 6);
        let r = Rotation::haar_random(&mut rng);
        let (ell, m, n) = (2usize, 1i64, -2i64);
        let lhs = psi.rotate(&r.inverse(), Side::Active).kick(ell, m, n).rotate(&r, Side::Active);
        let d = wigner_d(ell, &r);
        let mut rhs = FrameState::unnormalized(Vec::new());
        for p in -2i64..=2 {
            rhs = rhs.add(&psi.kick(ell, p, n).scale(d.get(p, m).conj()));
        }
        assert!(lhs.distance(&rhs) < 1e-10);
    }

    #[test]
    fn kick_homomorphism_on_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let psi = random_frame(&mut rng, 5);
        let two = psi.kick(1, 1, 0).kick(2, -1, 1);
        let combined = psi.multiply(|g| {
            d_product_expand(1, 1, 0, 2, -1, 1)
                .into_iter()
                .map(|(l, cf)| wigner_d_element(l, 0, 1, g) * cf)
                .sum()
        });
        assert!(two.distance(&combined) < 1e-10);
    }

    #[test]
    fn position_decoding() {
        let code = z3z6();
        let psi = code.logical_state(&[c(0.8, 0.0), c(0.0, 0.6)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut done = 0;
        while done < 300 {
            let r = Rotation::haar_random(&mut rng);
            if !crate::rotations::in_fundamental_cell(&r, &code.k) {
                continue;
            }
            done += 1;
            let dec = decode_position(&psi.rotate(&r, Side::Active), &code).unwrap();
            assert!(dec.estimate.approx_eq(&r, 1e-9));
            assert!((dec.corrected.inner(&psi).norm_sqr() - 1.0).abs() < 1e-12);
        }
        // Just past the boundary about ẑ the logical state is swapped.
        let plus = code.codewords[0].clone();
        let out = decode_position(&plus.rotate(&Rotation::about_z(PI / 6.0 + 1e-3), Side::Active), &code).unwrap();
        assert!(out.corrected.distance(&code.codewords[1]) < 1e-12);
        let id = decode_position(&plus, &code).unwrap();
        assert!(id.estimate.approx_eq(&Rotation::identity(), 1e-12) && !id.boundary);
        let edge = decode_position(&plus.rotate(&Rotation::about_z(PI / 6.0), Side::Active), &code).unwrap();
        assert!(edge.boundary);
    }

    #[test]
    fn momentum_decoding_and_logical_error() {
        let code = z3z6();
        let psi = code.logical_state(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let one = psi.kick(1, 1, 1);
        let lam = momentum_syndrome(&one, &code).unwrap();
        assert_eq!(lam, 1);
        let rec = decode_momentum(lam, &code).unwrap();
        assert_eq!(rec.m, 1);
        assert!(rec.apply(&one).distance(&psi) < 1e-12);
        let two = psi.kick(2, 2, 2);
        let rec = decode_momentum(momentum_syndrome(&two, &code).unwrap(), &code).unwrap();
        assert_eq!(rec.m, -1);
        let out = rec.apply(&two);
        let want = code.logical_state(&[c(0.6, 0.0), c(0.0, -0.8)]).unwrap();
        assert!(out.distance(&want) < 1e-12);
        let zero = decode_momentum(0, &code).unwrap();
        assert!(zero.apply(&psi).distance(&psi) < 1e-14);
        let even = build_molecular_code(SubgroupTag::Cyclic(4), SubgroupTag::Cyclic(8)).unwrap();
        let tie = decode_momentum(2, &even).unwrap();
        assert!(tie.tie && tie.m == 2 && tie.candidates == vec![2, -2]);
        assert!(momentum_syndrome(&psi.add(&one), &code).is_err());
    }

    #[test]
    fn check_operator_certificate() {
        for n in [2usize, 3, 5] {
            let code = build_molecular_code(SubgroupTag::Cyclic(n), SubgroupTag::Cyclic(2 * n)).unwrap();
            let rep = check_operators(&code, 7).unwrap();
            assert!(rep.certified(), "{rep:?}");
        }
        let to = build_molecular_code(SubgroupTag::Tetrahedral, SubgroupTag::Octahedral).unwrap();
        assert!(matches!(check_operators(&to, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn ancilla_readout() {
        let s = Rotation::from_axis_angle([0.3, -0.2, 1.0], 0.2).unwrap();
        let out = ancilla_position_readout(&s, 3, 3, 0.3, 200).unwrap();
        assert!(out.invariance.iter().all(|p| (p.overlap - 1.0).abs() < 1e-12));
        // Odd elements of Z_2N flip the fiducial's sign.
        for p in &out.invariance {
            let want = if p.k % 2 == 0 { 0.0 } else { PI };
            assert!((p.phase.abs() - want).abs() < 1e-9);
        }
        assert!(out.max_off_group < 1.0);
        assert!((out.kernel[0].1 - 1.0).abs() < 1e-12);
        assert!(out.kernel.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        assert!(ancilla_position_readout(&s, 3, 6, 0.3, 10).is_err());
        assert!(ancilla_position_readout(&s, 3, 3, 0.9, 10).is_err());
        for j in [1usize, 2, 5] {
            let v = [0.0, 0.6, 0.8];
            let w = [0.36, 0.48, 0.8];
            let dot: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let want = ((1.0 + dot) / 2.0).powi(2 * j as i32);
            assert!((spin_coherent_overlap(j, v, w).unwrap() - want).abs() < 1e-12);
            assert!(spin_coherent_overlap(j, v, [0.0, -0.6, -0.8]).unwrap() < 1e-20);
        }
    }

    #[test]
    fn average_momentum() {
        let small = avg_momentum(0.05, 3).unwrap();
        assert!((small.lbar_exact / small.lbar_asym - 1.0).abs() < 0.02);
        let big = avg_momentum(3.0, 3).unwrap();
        assert!(big.lbar_exact < 0.1);
        // Agrees with the explicit damped codeword.
        let code = z3z6();
        let st = frame_to_momentum(&code.codewords[0], 30, 0.3).unwrap();
        let stats = avg_momentum(0.3, 3).unwrap();
        assert!((st.mean_l_squared() - stats.l2_mean).abs() < 1e-8);
        assert_eq!(st.mass_cutoff(0.99), stats.mass_99);
    }

    #[test]
    fn leakage_is_a_probability_split() {
        let res = LeakageResolution::default();
        let rep = leakage_probability(3, 0.3, res).unwrap();
        assert!(rep.certificate.abs() < 1e-8, "{rep:?}");
        assert!(rep.p_leak > 0.0 && rep.p_leak < 0.05);
        let fine = leakage_probability(3, 0.3, LeakageResolution { n_theta: 32, n_phi: 48, omega_panels: 8, n_omega: 20 }).unwrap();
        assert!((fine.p_leak / rep.p_leak - 1.0).abs() < 1e-4);
        let small = leakage_probability(3, 0.2, res).unwrap();
        assert!(small.p_leak < rep.p_leak);
        assert!((small.p_leak / small.asymptote).ln().abs() < 2f64.ln());
    }

    #[test]
    fn distortion_against_momentum_states() {
        let code = z3z6();
        let delta = 0.35;
        let l = default_l_max(delta);
        let s0 = frame_to_momentum(&code.codewords[0], l, delta).unwrap();
        let s1 = frame_to_momentum(&code.codewords[1], l, delta).unwrap();
        for ell in [0usize, 1, 2] {
            let rep = distortion(3, delta, ell).unwrap();
            let kicked = s1.kick(ell, 0, 0).unwrap().state;
            let want = s0.inner(&kicked);
            assert!((rep.exact - want.re).abs() < 1e-10 && want.im.abs() < 1e-12, "ℓ={ell}");
        }
        assert!(distortion(3, 0.3, 3).is_err());
    }

    #[test]
    fn linear_fit_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14 && (f.r_squared - 1.0).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn active_and_passive_commute_on_frames(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random_frame(&mut rng, 4);
            let (a, b) = (Rotation::haar_random(&mut rng), Rotation::haar_random(&mut rng));
            let x = psi.rotate(&a, Side::Active).rotate(&b, Side::Passive);
            let y = psi.rotate(&b, Side::Passive).rotate(&a, Side::Active);
            prop_assert!(x.distance(&y) < 1e-10);
        }
    }
}
