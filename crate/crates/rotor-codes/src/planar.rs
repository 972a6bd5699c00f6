//! Planar-rotor (U(1)) codes on a discretised circle.
//!
//! The circle is replaced by `M` grid points `φ_j = 2πj/M`, with momentum
//! labels `ℓ ∈ Z_M` and `|φ_j⟩ = M^{-1/2} Σ_ℓ e^{−iℓφ_j}|ℓ⟩`. When `dN | M`
//! every codeword position and every correctable grid shift is exact, so all
//! statements below hold as identities between finite matrices.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use num_traits::Zero;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// A normalised wavefunction on the grid, stored in the position basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarState {
    amps: Vec<Complex64>,
}

impl PlanarState {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if amps.is_empty() || !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidArgument("state has zero norm".into()));
        }
        Ok(PlanarState { amps: amps.into_iter().map(|z| z / n).collect() })
    }

    /// The position eigenstate `|φ_j⟩`.
    pub fn position(m: usize, j: usize) -> Self {
        let mut amps = vec![Complex64::zero(); m];
        amps[j % m] = Complex64::new(1.0, 0.0);
        PlanarState { amps }
    }

    pub fn from_momentum(coeffs: &[Complex64]) -> Result<Self> {
        Self::from_amplitudes(inverse_dft(coeffs))
    }

    pub fn grid_size(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `ψ̃(ℓ) = M^{-1/2} Σ_j e^{−iℓφ_j} ψ_j` for `ℓ = 0, …, M−1`.
    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        forward_dft(&self.amps)
    }

    pub fn inner(&self, other: &PlanarState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &PlanarState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `X̂_{δφ}` with `δφ = 2π·steps/M`: `|φ⟩ → |φ + δφ⟩`.
    pub fn shift(&self, steps: i64) -> PlanarState {
        let m = self.amps.len() as i64;
        let mut out = vec![Complex64::zero(); self.amps.len()];
        for (j, a) in self.amps.iter().enumerate() {
            out[(j as i64 + steps).rem_euclid(m) as usize] = *a;
        }
        PlanarState { amps: out }
    }

    /// `Ẑ^{δℓ} = e^{iδℓφ̂}`.
    pub fn kick(&self, dl: i64) -> PlanarState {
        let m = self.amps.len() as f64;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, a)| a * Complex64::from_polar(1.0, TAU * (dl as f64) * j as f64 / m))
            .collect();
        PlanarState { amps }
    }

    /// Linear combination `Σ c_i ψ_i`, renormalised.
    pub fn superpose(terms: &[(Complex64, &PlanarState)]) -> Result<Self> {
        let m = terms.first().map(|t| t.1.grid_size()).unwrap_or(0);
        let mut amps = vec![Complex64::zero(); m];
        for (c, s) in terms {
            for (a, b) in amps.iter_mut().zip(&s.amps) {
                *a += c * b;
            }
        }
        Self::from_amplitudes(amps)
    }
}

fn forward_dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let s = (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|z| *z /= s);
    buf
}

fn inverse_dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let s = (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|z| *z /= s);
    buf
}

/// Signed representative of `x mod n` in `(−n/2, n/2]`.
pub fn signed_residue(x: i64, n: i64) -> i64 {
    let r = x.rem_euclid(n);
    if 2 * r > n {
        r - n
    } else {
        r
    }
}

/// The code `Z_N ⊂ Z_{dN}` on an `M`-point grid.
#[derive(Clone, Debug)]
pub struct PlanarCode {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub codewords: Vec<PlanarState>,
}

pub fn make_planar_code(n: usize, d: usize, m: usize) -> Result<PlanarCode> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("N and d must be positive".into()));
    }
    if m == 0 || !m.is_multiple_of(d * n) {
        return Err(Error::Divisibility { m, required: d * n });
    }
    let s = m / (d * n);
    let codewords = (0..d)
        .map(|k| {
            let mut amps = vec![Complex64::zero(); m];
            for h in 0..n {
                amps[(k + h * d) * s] = Complex64::new(1.0, 0.0);
            }
            PlanarState::from_amplitudes(amps).expect("nonzero")
        })
        .collect();
    Ok(PlanarCode { n, d, m, codewords })
}

impl PlanarCode {
    /// Grid steps between neighbouring points of `Z_{dN}`.
    pub fn spacing(&self) -> usize {
        self.m / (self.d * self.n)
    }

    pub fn stabilizer_z(&self) -> Monomial {
        Monomial::kick(self.m, (self.d * self.n) as i64, Basis::Position)
    }

    pub fn stabilizer_x(&self) -> Monomial {
        Monomial::shift(self.m, (self.m / self.n) as i64, Basis::Position)
    }

    pub fn logical_z(&self) -> Monomial {
        Monomial::kick(self.m, self.n as i64, Basis::Position)
    }

    pub fn logical_x(&self) -> Monomial {
        Monomial::shift(self.m, self.spacing() as i64, Basis::Position)
    }

    /// `Σ_k c_k |k̄⟩`, normalised.
    pub fn logical_state(&self, coeffs: &[Complex64]) -> Result<PlanarState> {
        if coeffs.len() != self.d {
            return Err(Error::InvalidArgument(format!("expected {} logical amplitudes", self.d)));
        }
        let terms: Vec<_> = coeffs.iter().copied().zip(self.codewords.iter()).collect();
        PlanarState::superpose(&terms)
    }

    /// Projection onto the code space, as `⟨k̄|ψ⟩`.
    pub fn decode_logical(&self, state: &PlanarState) -> Vec<Complex64> {
        self.codewords.iter().map(|c| c.inner(state)).collect()
    }
}

/// Outcome of measuring `φ̂ mod 2π/(dN)` and `L̂ mod N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Syndrome {
    /// Signed position residue in grid steps.
    pub position_steps: i64,
    /// The same residue in radians.
    pub position: f64,
    /// Momentum residue `λ ∈ Z_N`.
    pub momentum: usize,
}

pub fn syndrome(state: &PlanarState, code: &PlanarCode) -> Result<Syndrome> {
    if state.grid_size() != code.m {
        return Err(Error::InvalidArgument("state and code live on different grids".into()));
    }
    let s = code.spacing() as i64;
    let tol = 1e-10;
    let mut pos: Option<i64> = None;
    for (j, a) in state.amplitudes().iter().enumerate() {
        if a.norm() > tol {
            let r = (j as i64).rem_euclid(s);
            match pos {
                None => pos = Some(r),
                Some(p) if p != r => {
                    return Err(Error::AmbiguousSyndrome("position support spans several residues".into()))
                }
                _ => {}
            }
        }
    }
    let mut mom: Option<usize> = None;
    for (l, a) in state.momentum_amplitudes().iter().enumerate() {
        if a.norm() > tol {
            let r = l % code.n;
            match mom {
                None => mom = Some(r),
                Some(p) if p != r => {
                    return Err(Error::AmbiguousSyndrome("momentum support spans several residues".into()))
                }
                _ => {}
            }
        }
    }
    let steps = signed_residue(pos.unwrap_or(0), s);
    Ok(Syndrome {
        position_steps: steps,
        position: TAU * steps as f64 / code.m as f64,
        momentum: mom.unwrap_or(0),
    })
}

/// Smallest-magnitude kick with residue `λ mod N`; at even-`N` ties `+N/2`.
pub fn minimal_kick(lambda: usize, n: usize) -> i64 {
    signed_residue(lambda as i64, n as i64)
}

/// Applies `X̂†_{δφ}` and `Ẑ^{−m}` for the diagnosed shift and kick.
pub fn recover(state: &PlanarState, syn: &Syndrome, code: &PlanarCode) -> PlanarState {
    state.shift(-syn.position_steps).kick(-minimal_kick(syn.momentum, code.n))
}

/// One error-correction round on a chosen logical state.
#[derive(Clone, Debug, Serialize)]
pub struct PlanarTrace {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub requested_shift: f64,
    pub applied_shift_steps: i64,
    pub applied_shift: f64,
    pub kick: i64,
    pub syndrome: Syndrome,
    pub fidelity_before: f64,
    pub fidelity_after: f64,
}

/// Corrupts `ψ` by the grid shift nearest to `shift` radians and a kick, then
/// measures the syndrome and recovers.
pub fn run_round(code: &PlanarCode, psi: &PlanarState, shift: f64, kick: i64) -> Result<PlanarTrace> {
    let steps = (shift * code.m as f64 / TAU).round() as i64;
    let bad = psi.kick(kick).shift(steps);
    let syn = syndrome(&bad, code)?;
    let fixed = recover(&bad, &syn, code);
    Ok(PlanarTrace {
        n: code.n,
        d: code.d,
        m: code.m,
        requested_shift: shift,
        applied_shift_steps: steps,
        applied_shift: TAU * steps as f64 / code.m as f64,
        kick,
        syndrome: syn,
        fidelity_before: psi.fidelity(&bad),
        fidelity_after: psi.fidelity(&fixed),
    })
}

/// `|a;λ⟩ = N^{-1/2} Σ_h e^{i2πλh/N} |a + 2πh/N⟩` with `a = 2π·a_steps/M`.
pub fn partial_fourier_state(m: usize, n: usize, a_steps: i64, lambda: usize) -> Result<PlanarState> {
    if n == 0 || !m.is_multiple_of(n) {
        return Err(Error::Divisibility { m, required: n });
    }
    let mut amps = vec![Complex64::zero(); m];
    for h in 0..n {
        let j = (a_steps + (h * m / n) as i64).rem_euclid(m as i64) as usize;
        amps[j] = Complex64::from_polar(1.0, TAU * (lambda * h) as f64 / n as f64);
    }
    PlanarState::from_amplitudes(amps)
}

/// The grid offsets `a` labelling the cell `(−π/N, π/N]`.
pub fn partial_fourier_offsets(m: usize, n: usize) -> Vec<i64> {
    let w = (m / n) as i64;
    (0..w).map(|k| signed_residue(k, w)).collect()
}

/// One measurement branch of the initialisation protocol.
#[derive(Clone, Debug)]
pub struct InitBranch {
    pub lambda: usize,
    pub probability: f64,
    pub state: PlanarState,
    pub fidelity: f64,
}

/// Prepares `|0̄⟩` from `|φ = 0⟩` with a qu`N`it ancilla: `cphase′`, measure the
/// ancilla, then kick by `−λ⋆`. Every branch is returned.
pub fn initialize_logical(code: &PlanarCode) -> Result<Vec<InitBranch>> {
    let (m, n) = (code.m, code.n);
    let rotor = PlanarState::position(m, 0).momentum_amplitudes();
    // cphase′ on rotor (momentum basis) ⊗ ancilla (position basis), index ℓ·N + h.
    let gate = Monomial::cphase_prime(m, n);
    let mut joint = vec![Complex64::zero(); m * n];
    for (l, a) in rotor.iter().enumerate() {
        joint[l * n] = *a;
    }
    let joint = gate.apply(&joint);
    let mut out = Vec::with_capacity(n);
    for lambda in 0..n {
        let cond: Vec<Complex64> = (0..m).map(|l| joint[l * n + lambda]).collect();
        let p: f64 = cond.iter().map(|z| z.norm_sqr()).sum();
        let state = PlanarState::from_momentum(&cond)?.kick(-(lambda as i64));
        let fidelity = state.fidelity(&code.codewords[0]);
        out.push(InitBranch { lambda, probability: p, state, fidelity });
    }
    Ok(out)
}

/// Which basis a [`Monomial`] is written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Basis {
    Position,
    Momentum,
}

/// An operator `O|j⟩ = c_j |π(j)⟩`: a permutation with phases.
///
/// Every gate used by the planar codes is of this form in either the position
/// or the momentum basis, so identities between them can be checked exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub basis: Basis,
    pub perm: Vec<usize>,
    pub phase: Vec<Complex64>,
}

impl Monomial {
    pub fn identity(dim: usize, basis: Basis) -> Self {
        Monomial { basis, perm: (0..dim).collect(), phase: vec![Complex64::new(1.0, 0.0); dim] }
    }

    fn diagonal(basis: Basis, phase: Vec<Complex64>) -> Self {
        Monomial { basis, perm: (0..phase.len()).collect(), phase }
    }

    fn permutation(basis: Basis, perm: Vec<usize>) -> Self {
        let n = perm.len();
        Monomial { basis, perm, phase: vec![Complex64::new(1.0, 0.0); n] }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// `X̂_φ` with `φ = 2π·steps/M`.
    pub fn shift(m: usize, steps: i64, basis: Basis) -> Self {
        match basis {
            Basis::Position => Self::permutation(
                basis,
                (0..m).map(|j| (j as i64 + steps).rem_euclid(m as i64) as usize).collect(),
            ),
            Basis::Momentum => Self::diagonal(
                basis,
                (0..m).map(|l| Complex64::from_polar(1.0, -TAU * (steps * l as i64) as f64 / m as f64)).collect(),
            ),
        }
    }

    /// `Ẑ^{dl}`.
    pub fn kick(m: usize, dl: i64, basis: Basis) -> Self {
        match basis {
            Basis::Position => Self::diagonal(
                basis,
                (0..m).map(|j| Complex64::from_polar(1.0, TAU * (dl * j as i64) as f64 / m as f64)).collect(),
            ),
            Basis::Momentum => Self::permutation(
                basis,
                (0..m).map(|l| (l as i64 + dl).rem_euclid(m as i64) as usize).collect(),
            ),
        }
    }

    /// `quad_φ = e^{−iφL̂(L̂+1)/2}` in the momentum basis, `φ = 2π·steps/M`.
    ///
    /// On the grid this is a rotor operator only when `φ·M(M−1)/2 ∈ 2πZ`, which
    /// for even `M` means an even number of steps.
    pub fn quad(m: usize, steps: i64) -> Result<Self> {
        if (steps * (m as i64 - 1)) % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "quad angle 2π·{steps}/{m} is not compatible with the grid"
            )));
        }
        let phase = (0..m as i64)
            .map(|l| {
                // ℓ(ℓ+1)/2 is an integer, so reduce modulo M before scaling.
                let e = ((l * (l + 1) / 2) * steps).rem_euclid(m as i64);
                Complex64::from_polar(1.0, -TAU * e as f64 / m as f64)
            })
            .collect();
        Ok(Self::diagonal(Basis::Momentum, phase))
    }

    /// `cphase_φ = e^{−iφ L̂⊗L̂}` on two rotors, momentum basis, index `ℓ₁M + ℓ₂`.
    pub fn cphase(m: usize, steps: i64) -> Self {
        let mut phase = Vec::with_capacity(m * m);
        for l1 in 0..m as i64 {
            for l2 in 0..m as i64 {
                let e = (l1 * l2 % m as i64 * steps).rem_euclid(m as i64);
                phase.push(Complex64::from_polar(1.0, -TAU * e as f64 / m as f64));
            }
        }
        Self::diagonal(Basis::Momentum, phase)
    }

    /// `crot: |φ₁, φ₂⟩ → |φ₁, φ₂ + φ₁⟩`, position basis, index `j₁M + j₂`.
    pub fn crot(m: usize) -> Self {
        let perm = (0..m * m).map(|i| (i / m) * m + (i / m + i % m) % m).collect();
        Self::permutation(Basis::Position, perm)
    }

    /// `cphase′ = Σ_ℓ |ℓ⟩⟨ℓ| ⊗ 𝒳^ℓ` with a qu`N`it; index `ℓN + h`.
    pub fn cphase_prime(m: usize, n: usize) -> Self {
        let perm = (0..m * n).map(|i| (i / n) * n + (i % n + i / n) % n).collect();
        Self::permutation(Basis::Momentum, perm)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Monomial) -> Monomial {
        let perm = other.perm.iter().map(|&j| self.perm[j]).collect();
        let phase = other.perm.iter().zip(&other.phase).map(|(&j, c)| c * self.phase[j]).collect();
        Monomial { basis: self.basis, perm, phase }
    }

    pub fn adjoint(&self) -> Monomial {
        let n = self.dim();
        let mut perm = vec![0; n];
        let mut phase = vec![Complex64::zero(); n];
        for j in 0..n {
            perm[self.perm[j]] = j;
            phase[self.perm[j]] = self.phase[j].conj();
        }
        Monomial { basis: self.basis, perm, phase }
    }

    pub fn tensor(&self, other: &Monomial) -> Monomial {
        let (a, b) = (self.dim(), other.dim());
        let mut perm = Vec::with_capacity(a * b);
        let mut phase = Vec::with_capacity(a * b);
        for i in 0..a {
            for j in 0..b {
                perm.push(self.perm[i] * b + other.perm[j]);
                phase.push(self.phase[i] * other.phase[j]);
            }
        }
        Monomial { basis: self.basis, perm, phase }
    }

    pub fn scale(&self, c: Complex64) -> Monomial {
        Monomial { basis: self.basis, perm: self.perm.clone(), phase: self.phase.iter().map(|p| p * c).collect() }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::zero(); v.len()];
        for (j, a) in v.iter().enumerate() {
            out[self.perm[j]] += self.phase[j] * a;
        }
        out
    }

    /// Largest entrywise difference, infinite when the permutations differ.
    pub fn distance(&self, other: &Monomial) -> f64 {
        if self.perm != other.perm || self.basis != other.basis {
            return f64::INFINITY;
        }
        self.phase.iter().zip(&other.phase).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let n = self.dim();
        let mut d = nalgebra::DMatrix::zeros(n, n);
        for j in 0..n {
            d[(self.perm[j], j)] = self.phase[j];
        }
        d
    }
}

/// `F_{ℓj} = ⟨ℓ|φ_j⟩ = M^{-1/2} e^{−iℓφ_j}`; maps position to momentum amplitudes.
pub fn dft_matrix(m: usize) -> nalgebra::DMatrix<Complex64> {
    let s = (m as f64).sqrt();
    nalgebra::DMatrix::from_fn(m, m, |l, j| {
        Complex64::from_polar(1.0 / s, -TAU * ((l * j) % m) as f64 / m as f64)
    })
}

/// The operator ordering constant `c = (π/2)(N−1)/N²`.
pub fn quad_constant(n: usize) -> f64 {
    0.5 * PI * (n as f64 - 1.0) / (n * n) as f64
}
