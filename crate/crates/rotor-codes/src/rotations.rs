//! Rotations as hemispherical unit quaternions, the finite subgroups of SO(3),
//! coset tables and Voronoi cells.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to match group elements.
pub const MATCH_TOL: f64 = 1e-9;

/// Components below this are treated as zero when picking the hemisphere.
const HEMI_EPS: f64 = 1e-14;

/// Ties in the Voronoi rule are decided lexicographically below this gap.
const TIE_EPS: f64 = 1e-12;

/// A rotation of R³ stored as a unit quaternion `(w, x, y, z)` with `w ≥ 0`.
///
/// When `w` vanishes the first nonzero vector component is taken positive, so
/// every rotation has exactly one representative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl From<Rotation> for [f64; 4] {
    fn from(r: Rotation) -> Self {
        r.quaternion()
    }
}

impl TryFrom<[f64; 4]> for Rotation {
    type Error = Error;

    fn try_from(q: [f64; 4]) -> Result<Self> {
        Rotation::from_quaternion(q[0], q[1], q[2], q[3])
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub const fn identity() -> Self {
        Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Normalises and canonicalises an arbitrary nonzero quaternion.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidArgument(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalised"
            )));
        }
        // Already-unit input is left untouched so canonicalisation is idempotent.
        let n = if (n - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { n };
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let mut q = [w, x, y, z];
        if q[0].abs() <= HEMI_EPS {
            q[0] = 0.0;
        }
        let lead = q.iter().copied().find(|c| c.abs() > HEMI_EPS).unwrap_or(1.0);
        if lead < 0.0 {
            for c in q.iter_mut() {
                *c = -*c;
            }
        }
        // Avoid negative zeros so that serialised output is stable.
        for c in q.iter_mut() {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        Rotation { w: q[0], x: q[1], y: q[2], z: q[3] }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// ZYZ Euler angles, `R = R_z(α) R_y(β) R_z(γ)`.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> Self {
        let (sb, cb) = (0.5 * beta).sin_cos();
        let sp = 0.5 * (alpha + gamma);
        let sm = 0.5 * (alpha - gamma);
        Self::canonical(cb * sp.cos(), -sb * sm.sin(), sb * sm.cos(), cb * sp.sin())
    }

    /// Returns `(α, β, γ)` with `α, γ ∈ [0, 2π)` and `β ∈ [0, π]`.
    ///
    /// At the gimbal poles the whole in-plane angle is put into `α`.
    pub fn to_euler(&self) -> (f64, f64, f64) {
        let a = self.x.hypot(self.y);
        let b = self.w.hypot(self.z);
        let beta = 2.0 * a.atan2(b);
        let (alpha, gamma) = if a < 1e-13 {
            (2.0 * self.z.atan2(self.w), 0.0)
        } else if b < 1e-13 {
            (2.0 * (-self.x).atan2(self.y), 0.0)
        } else {
            let sp = self.z.atan2(self.w);
            let sm = (-self.x).atan2(self.y);
            (sp + sm, sp - sm)
        };
        (wrap_tau(alpha), beta, wrap_tau(gamma))
    }

    /// Rotation by `omega` about `axis` (need not be normalised).
    pub fn from_axis_angle(axis: [f64; 3], omega: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidArgument("rotation axis has zero length".into()));
        }
        let (s, c) = (0.5 * omega).sin_cos();
        Ok(Self::canonical(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n))
    }

    /// Rotation angle `ω ∈ [0, π]` and unit axis. The identity reports `ẑ`.
    pub fn to_axis_angle(&self) -> (f64, [f64; 3]) {
        let s = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        let omega = 2.0 * s.atan2(self.w);
        if s < 1e-15 {
            return (0.0, [0.0, 0.0, 1.0]);
        }
        (omega, [self.x / s, self.y / s, self.z / s])
    }

    pub fn about_z(omega: f64) -> Self {
        let (s, c) = (0.5 * omega).sin_cos();
        Self::canonical(c, 0.0, 0.0, s)
    }

    pub fn about_y(omega: f64) -> Self {
        let (s, c) = (0.5 * omega).sin_cos();
        Self::canonical(c, 0.0, s, 0.0)
    }

    pub fn compose(&self, o: &Rotation) -> Rotation {
        let (a, b) = (self, o);
        Self::canonical(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn inverse(&self) -> Rotation {
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.to_axis_angle().0
    }

    /// Bi-invariant distance: the angle of `self⁻¹ · other`.
    pub fn distance(&self, other: &Rotation) -> f64 {
        self.inverse().compose(other).angle()
    }

    /// Quaternion distance `min(|q − p|, |q + p|)`.
    pub fn quat_distance(&self, other: &Rotation) -> f64 {
        let (mut dm, mut dp) = (0.0, 0.0);
        for (a, b) in self.quaternion().iter().zip(other.quaternion()) {
            dm += (a - b) * (a - b);
            dp += (a + b) * (a + b);
        }
        dm.min(dp).sqrt()
    }

    pub fn approx_eq(&self, other: &Rotation, tol: f64) -> bool {
        self.quat_distance(other) <= tol
    }

    /// 3×3 rotation matrix, row-major.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let Rotation { w, x, y, z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = self.matrix();
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Haar-distributed rotation (Shoemake's subgroup algorithm).
    pub fn haar_random<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let (s2, c2) = (TAU * u2).sin_cos();
        let (s3, c3) = (TAU * u3).sin_cos();
        Self::canonical(b * c3, a * s2, a * c2, b * s3)
    }

    /// Orders rotations by canonical `w`, then lexicographically, treating
    /// differences below `TIE_EPS` as equal. Used for every tie-break.
    fn prefer(&self, other: &Rotation) -> std::cmp::Ordering {
        for (a, b) in self.quaternion().iter().zip(other.quaternion()) {
            if (a - b).abs() > TIE_EPS {
                return a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal);
            }
        }
        std::cmp::Ordering::Equal
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Rotation> for &'a Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        self.compose(rhs)
    }
}

pub fn rotation_from_euler(alpha: f64, beta: f64, gamma: f64) -> Rotation {
    Rotation::from_euler(alpha, beta, gamma)
}

pub fn compose(r: &Rotation, s: &Rotation) -> Rotation {
    r.compose(s)
}

fn wrap_tau(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if TAU - r < 1e-13 {
        0.0
    } else {
        r
    }
}

/// A point of the unit sphere in polar coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub theta: f64,
    pub phi: f64,
}

impl SpherePoint {
    pub fn new(theta: f64, phi: f64) -> Self {
        SpherePoint { theta, phi }
    }

    pub fn from_vec(v: [f64; 3]) -> Result<Self> {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !r.is_finite() || r < 1e-300 {
            return Err(Error::InvalidArgument("zero vector has no direction".into()));
        }
        let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
        let phi = if v[0].hypot(v[1]) < 1e-15 { 0.0 } else { v[1].atan2(v[0]) };
        Ok(SpherePoint { theta, phi })
    }

    pub fn to_vec(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn antipode(&self) -> Self {
        let v = self.to_vec();
        Self::from_vec([-v[0], -v[1], -v[2]]).expect("unit vector")
    }

    pub fn rotate(&self, r: &Rotation) -> Self {
        Self::from_vec(r.apply(self.to_vec())).expect("unit vector")
    }

    pub fn approx_eq(&self, o: &SpherePoint, tol: f64) -> bool {
        let (a, b) = (self.to_vec(), o.to_vec());
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt() <= tol
    }
}

/// Which finite subgroup of SO(3).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubgroupTag {
    Cyclic(usize),
    Dihedral(usize),
    Tetrahedral,
    Octahedral,
    Icosahedral,
}

impl SubgroupTag {
    pub fn order(&self) -> usize {
        match *self {
            SubgroupTag::Cyclic(n) => n,
            SubgroupTag::Dihedral(n) => 2 * n,
            SubgroupTag::Tetrahedral => 12,
            SubgroupTag::Octahedral => 24,
            SubgroupTag::Icosahedral => 60,
        }
    }
}

impl fmt::Display for SubgroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgroupTag::Cyclic(n) => write!(f, "Z{n}"),
            SubgroupTag::Dihedral(n) => write!(f, "D{n}"),
            SubgroupTag::Tetrahedral => write!(f, "T"),
            SubgroupTag::Octahedral => write!(f, "O"),
            SubgroupTag::Icosahedral => write!(f, "I"),
        }
    }
}

impl FromStr for SubgroupTag {
    type Err = Error;

    /// Accepts `Z3`, `Z_3`, `D6`, `T`, `O`, `I` (case-insensitive letter).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::UnknownSubgroup(s.to_string());
        let mut chars = t.chars();
        let head = chars.next().ok_or_else(bad)?.to_ascii_uppercase();
        let rest = chars.as_str().trim_start_matches('_');
        let num = || -> Result<usize> {
            let n: usize = rest.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            Ok(n)
        };
        match head {
            'Z' | 'C' => Ok(SubgroupTag::Cyclic(num()?)),
            'D' => Ok(SubgroupTag::Dihedral(num()?)),
            'T' if rest.is_empty() => Ok(SubgroupTag::Tetrahedral),
            'O' if rest.is_empty() => Ok(SubgroupTag::Octahedral),
            'I' if rest.is_empty() => Ok(SubgroupTag::Icosahedral),
            _ => Err(bad()),
        }
    }
}

/// An enumerated finite subgroup of SO(3) with its multiplication table.
#[derive(Clone, Debug)]
pub struct FiniteSubgroup {
    tag: SubgroupTag,
    elements: Vec<Rotation>,
    generators: Vec<Rotation>,
    table: Vec<Vec<usize>>,
    inverses: Vec<usize>,
}

impl FiniteSubgroup {
    /// Builds `Z_N` and `D_N` about `ẑ` and the polyhedral groups in the
    /// orientation where the 2-fold axes of `T` lie along the coordinate axes.
    ///
    /// Dihedral reflections are `s_h = R(2πh/N, π, 0)`, so `s_0` is the
    /// half-turn about `ŷ` and `s_1` is represented by `σ_x` in the 2-dim irreps.
    pub fn new(tag: SubgroupTag) -> Result<Self> {
        let c3 = Rotation::from_axis_angle([1.0, 1.0, 1.0], TAU / 3.0)?;
        let c2 = Rotation::about_z(PI);
        let (elements, generators) = match tag {
            SubgroupTag::Cyclic(0) | SubgroupTag::Dihedral(0) => {
                return Err(Error::InvalidArgument("subgroup parameter N must be ≥ 1".into()))
            }
            SubgroupTag::Cyclic(n) => {
                let el: Vec<_> = (0..n).map(|h| Rotation::about_z(TAU * h as f64 / n as f64)).collect();
                (el, vec![Rotation::about_z(TAU / n as f64)])
            }
            SubgroupTag::Dihedral(n) => {
                let mut el: Vec<_> =
                    (0..n).map(|h| Rotation::about_z(TAU * h as f64 / n as f64)).collect();
                el.extend((0..n).map(|h| Rotation::from_euler(TAU * h as f64 / n as f64, PI, 0.0)));
                (el, vec![Rotation::about_z(TAU / n as f64), Rotation::from_euler(0.0, PI, 0.0)])
            }
            SubgroupTag::Tetrahedral => {
                let gens = vec![c3, c2];
                (closure(&gens), gens)
            }
            SubgroupTag::Octahedral => {
                let gens = vec![c3, c2, Rotation::about_z(PI / 2.0)];
                (closure(&gens), gens)
            }
            SubgroupTag::Icosahedral => {
                let phi = 0.5 * (1.0 + 5f64.sqrt());
                let gens = vec![c3, c2, Rotation::from_axis_angle([0.0, 1.0, phi], TAU / 5.0)?];
                (closure(&gens), gens)
            }
        };
        if elements.len() != tag.order() {
            return Err(Error::Numerical(format!(
                "closure of {tag} produced {} elements",
                elements.len()
            )));
        }
        let find = |r: &Rotation| elements.iter().position(|e| e.approx_eq(r, MATCH_TOL));
        let mut table = vec![vec![0; elements.len()]; elements.len()];
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate() {
                table[i][j] = find(&a.compose(b))
                    .ok_or_else(|| Error::Numerical(format!("{tag} is not closed")))?;
            }
        }
        let inverses = (0..elements.len())
            .map(|i| table[i].iter().position(|&k| k == 0).expect("identity first"))
            .collect();
        Ok(FiniteSubgroup { tag, elements, generators, table, inverses })
    }

    pub fn tag(&self) -> SubgroupTag {
        self.tag
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Rotation] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Rotation {
        &self.elements[i]
    }

    pub fn generators(&self) -> &[Rotation] {
        &self.generators
    }

    /// Index of `e_i · e_j`.
    pub fn mul(&self, i: usize, j: usize) -> usize {
        self.table[i][j]
    }

    pub fn inv(&self, i: usize) -> usize {
        self.inverses[i]
    }

    pub fn index_of(&self, r: &Rotation) -> Option<usize> {
        self.elements.iter().position(|e| e.approx_eq(r, MATCH_TOL))
    }

    pub fn contains(&self, r: &Rotation) -> bool {
        self.index_of(r).is_some()
    }

    pub fn is_subgroup_of(&self, k: &FiniteSubgroup) -> bool {
        self.elements.iter().all(|e| k.contains(e))
    }

    /// Position of every element of `self` inside `k`.
    pub fn embedding(&self, k: &FiniteSubgroup) -> Result<Vec<usize>> {
        self.elements
            .iter()
            .map(|e| k.index_of(e))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::NotASubgroup { sub: self.tag.to_string(), sup: k.tag.to_string() })
    }

    /// Conjugacy classes as sorted index lists, ordered by smallest member.
    pub fn conjugacy_classes(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let mut class_of = vec![usize::MAX; n];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if class_of[i] != usize::MAX {
                continue;
            }
            let mut cls: Vec<usize> =
                (0..n).map(|g| self.mul(self.mul(g, i), self.inv(g))).collect();
            cls.sort_unstable();
            cls.dedup();
            for &c in &cls {
                class_of[c] = classes.len();
            }
            classes.push(cls);
        }
        classes
    }
}

pub fn build_subgroup(tag: SubgroupTag) -> Result<FiniteSubgroup> {
    FiniteSubgroup::new(tag)
}

fn closure(gens: &[Rotation]) -> Vec<Rotation> {
    let mut el = vec![Rotation::identity()];
    let mut head = 0;
    while head < el.len() {
        let a = el[head];
        head += 1;
        for g in gens {
            let p = a.compose(g);
            if !el.iter().any(|e| e.approx_eq(&p, MATCH_TOL)) {
                el.push(p);
            }
            // Guard against a generator set that is not finite.
            if el.len() > 120 {
                return el;
            }
        }
    }
    el
}

/// Left cosets `rH` of `H` in `K`.
#[derive(Clone, Debug, Serialize)]
pub struct CosetTable {
    pub k: SubgroupTag,
    pub h: SubgroupTag,
    /// One per coset, the member closest to the identity.
    pub representatives: Vec<Rotation>,
    /// K-indices of each coset, listed as `r·h` in the order of H's elements.
    pub members: Vec<Vec<usize>>,
    /// Coset number of each element of K.
    pub coset_of: Vec<usize>,
}

impl CosetTable {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }
}

pub fn cosets(k: &FiniteSubgroup, h: &FiniteSubgroup) -> Result<CosetTable> {
    h.embedding(k)?;
    let mut coset_of = vec![usize::MAX; k.order()];
    let mut representatives = Vec::new();
    let mut members = Vec::new();
    for i in 0..k.order() {
        if coset_of[i] != usize::MAX {
            continue;
        }
        let seed = k.element(i);
        let rows: Vec<Rotation> = h.elements().iter().map(|e| seed.compose(e)).collect();
        // Closest to identity, ties to the lexicographically largest quaternion.
        let rep = *rows
            .iter()
            .max_by(|a, b| a.prefer(b))
            .expect("nonempty coset");
        let r_idx = k.index_of(&rep).expect("closed");
        let idx: Vec<usize> = h
            .elements()
            .iter()
            .map(|e| k.index_of(&rep.compose(e)).expect("closed"))
            .collect();
        for &j in &idx {
            coset_of[j] = representatives.len();
        }
        debug_assert_eq!(idx[0], r_idx);
        representatives.push(rep);
        members.push(idx);
    }
    Ok(CosetTable { k: k.tag(), h: h.tag(), representatives, members, coset_of })
}

/// Writes `R = coset_part · compensator` with `compensator ∈ K` chosen so
/// that `coset_part` lies in the Voronoi cell of the identity.
pub fn snap_to_orbit(r: &Rotation, k: &FiniteSubgroup) -> (Rotation, Rotation) {
    let mut best: Option<(Rotation, Rotation)> = None;
    for g in k.elements() {
        let c = r.compose(&g.inverse());
        let take = match &best {
            None => true,
            Some((b, _)) => c.prefer(b) == std::cmp::Ordering::Greater,
        };
        if take {
            best = Some((c, *g));
        }
    }
    best.expect("nonempty group")
}

/// Whether `R` is at least as close to the identity as to every other `h ∈ H`.
///
/// Exact ties go to the lexicographically larger quaternion, which gives the
/// half-open interval `(−π/2N, π/2N]` for rotations about `ẑ`.
pub fn in_fundamental_cell(r: &Rotation, h: &FiniteSubgroup) -> bool {
    let (_, comp) = snap_to_orbit(r, h);
    comp.approx_eq(&Rotation::identity(), MATCH_TOL)
}

/// Largest correctable rotation angle about an axis at polar angle `theta`
/// for a cyclic group of order `m` about `ẑ`.
pub fn omega_max(theta: f64, m: usize) -> f64 {
    let x = theta.cos() / (PI / (2.0 * m.max(1) as f64)).tan();
    if x.abs() < 1e-15 {
        PI
    } else {
        (2.0 * (1.0 / x).atan()).abs()
    }
}
