//! Irreducible representations of the finite subgroups, branching rules
//! SO(3) → K → H, twirls, reciprocal spaces and admissible bases.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;

use nalgebra as na;
use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rotations::{FiniteSubgroup, Rotation, SubgroupTag};
use crate::wigner::{character, wigner_d};

type CMat = na::DMatrix<Complex64>;

/// One irrep: a unitary matrix per group element, in the group's element order.
#[derive(Clone, Debug)]
pub struct Irrep {
    pub label: String,
    pub dim: usize,
    pub matrices: Vec<CMat>,
    pub characters: Vec<Complex64>,
}

impl Irrep {
    fn from_matrices(label: impl Into<String>, matrices: Vec<CMat>) -> Self {
        let dim = matrices[0].nrows();
        let characters = matrices.iter().map(|m| m.trace()).collect();
        Irrep { label: label.into(), dim, matrices, characters }
    }
}

/// All irreps of a finite subgroup. The trivial irrep is always first.
#[derive(Clone, Debug)]
pub struct IrrepTable {
    pub group: FiniteSubgroup,
    pub irreps: Vec<Irrep>,
}

impl IrrepTable {
    pub fn labels(&self) -> Vec<&str> {
        self.irreps.iter().map(|i| i.label.as_str()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.irreps.iter().position(|i| i.label == label)
    }

    /// Largest deviation from row orthogonality of the characters.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.group.order() as f64;
        let mut worst: f64 = 0.0;
        for (a, ia) in self.irreps.iter().enumerate() {
            for (b, ib) in self.irreps.iter().enumerate() {
                let s: Complex64 = ia.characters.iter().zip(&ib.characters).map(|(x, y)| x.conj() * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s / n - want).norm());
            }
        }
        worst
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scalar(z: Complex64) -> CMat {
    CMat::from_element(1, 1, z)
}

/// Builds the irrep table of `h`.
///
/// `Z_N` and `D_N` use closed forms. The polyhedral groups are decomposed
/// numerically from the regular representation; only their characters carry
/// meaning, the bases are arbitrary.
pub fn irrep_table(h: &FiniteSubgroup) -> Result<IrrepTable> {
    let irreps = match h.tag() {
        SubgroupTag::Cyclic(n) => (0..n)
            .map(|lam| {
                let mats = (0..n)
                    .map(|k| scalar(Complex64::from_polar(1.0, TAU * (lam * k) as f64 / n as f64)))
                    .collect();
                Irrep::from_matrices(lam.to_string(), mats)
            })
            .collect(),
        SubgroupTag::Dihedral(n) => dihedral_irreps(n),
        _ => {
            let raw = numeric_irreps(h)?;
            label_polyhedral(h, raw)?
        }
    };
    let table = IrrepTable { group: h.clone(), irreps };
    let sum_sq: usize = table.irreps.iter().map(|i| i.dim * i.dim).sum();
    if sum_sq != h.order() || table.orthogonality_defect() > 1e-9 {
        return Err(Error::Numerical(format!("irrep table of {} is inconsistent", h.tag())));
    }
    Ok(table)
}

/// Element order: `r^h` for `h < N`, then `s_h = r^h s_0`.
fn dihedral_irreps(n: usize) -> Vec<Irrep> {
    let one = |f: &dyn Fn(usize, bool) -> f64| -> Vec<CMat> {
        let mut v: Vec<CMat> = (0..n).map(|h| scalar(c(f(h, false), 0.0))).collect();
        v.extend((0..n).map(|h| scalar(c(f(h, true), 0.0))));
        v
    };
    let alt = |h: usize| if h.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut out = vec![
        Irrep::from_matrices("1", one(&|_, _| 1.0)),
        Irrep::from_matrices("1′", one(&|_, s| if s { -1.0 } else { 1.0 })),
    ];
    if n.is_multiple_of(2) {
        out.push(Irrep::from_matrices("1+", one(&|h, _| alt(h))));
        out.push(Irrep::from_matrices("1-", one(&|h, s| if s { -alt(h) } else { alt(h) })));
    }
    for k in 1..n.div_ceil(2) {
        if 2 * k == n {
            continue;
        }
        let w = |e: i64| Complex64::from_polar(1.0, TAU * e as f64 / n as f64);
        let mut mats = Vec::with_capacity(2 * n);
        for h in 0..n as i64 {
            let e = k as i64 * h;
            mats.push(CMat::from_row_slice(2, 2, &[w(e), Complex64::zero(), Complex64::zero(), w(-e)]));
        }
        for h in 0..n as i64 {
            let e = k as i64 * (h - 1);
            mats.push(CMat::from_row_slice(2, 2, &[Complex64::zero(), w(e), w(-e), Complex64::zero()]));
        }
        out.push(Irrep::from_matrices(format!("2_{k}"), mats));
    }
    out
}

/// Splits the regular representation with a random element of its commutant.
fn numeric_irreps(g: &FiniteSubgroup) -> Result<Vec<Vec<CMat>>> {
    let n = g.order();
    for attempt in 0..16u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + attempt);
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = c(rng.gen_range(-1.0..1.0), 0.0);
            for j in 0..i {
                let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
        }
        // X = Σ_g R(g) A R(g)ᵀ commutes with the left-regular action.
        let mut x = CMat::zeros(n, n);
        for gi in 0..n {
            let ginv = g.inv(gi);
            let perm: Vec<usize> = (0..n).map(|i| g.mul(ginv, i)).collect();
            for i in 0..n {
                for j in 0..n {
                    x[(i, j)] += a[(perm[i], perm[j])];
                }
            }
        }
        let eig = na::SymmetricEigen::new(x);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for &i in &order {
            match clusters.last_mut() {
                Some(cl) if (eig.eigenvalues[i] - eig.eigenvalues[*cl.last().unwrap()]).abs() < 1e-8 * scale => {
                    cl.push(i)
                }
                _ => clusters.push(vec![i]),
            }
        }
        let mut found: Vec<Vec<CMat>> = Vec::new();
        let mut found_chars: Vec<Vec<Complex64>> = Vec::new();
        let mut ok = true;
        for cl in &clusters {
            let d = cl.len();
            let v = CMat::from_fn(n, d, |r, k| eig.eigenvectors[(r, cl[k])]);
            let mats: Vec<CMat> = (0..n)
                .map(|gi| {
                    let ginv = g.inv(gi);
                    // (R(g) V)[a, :] = V[g⁻¹a, :]
                    let rv = CMat::from_fn(n, d, |r, k| v[(g.mul(ginv, r), k)]);
                    v.adjoint() * rv
                })
                .collect();
            let chars: Vec<Complex64> = mats.iter().map(|m| m.trace()).collect();
            let norm: f64 = chars.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            if (norm - 1.0).abs() > 1e-8 {
                ok = false;
                break;
            }
            let dup = found_chars
                .iter()
                .any(|fc| fc.iter().zip(&chars).all(|(a, b)| (a - b).norm() < 1e-6));
            if !dup {
                found.push(mats);
                found_chars.push(chars);
            }
        }
        let sum_sq: usize = found.iter().map(|m| m[0].nrows().pow(2)).sum();
        if ok && sum_sq == n {
            return Ok(found);
        }
    }
    Err(Error::Numerical(format!("could not split the regular representation of {}", g.tag())))
}

fn label_polyhedral(g: &FiniteSubgroup, raw: Vec<Vec<CMat>>) -> Result<Vec<Irrep>> {
    let find_axis = |axis: [f64; 3], w: f64| -> Result<usize> {
        g.index_of(&Rotation::from_axis_angle(axis, w)?)
            .ok_or_else(|| Error::Numerical(format!("missing generator in {}", g.tag())))
    };
    let irreps: Vec<Irrep> = raw.into_iter().map(|m| Irrep::from_matrices("", m)).collect();
    let is_trivial = |i: &Irrep| i.dim == 1 && i.characters.iter().all(|z| (z - 1.0).norm() < 1e-8);
    let mut labelled: Vec<(usize, Irrep)> = Vec::new();
    let order: &[&str] = match g.tag() {
        SubgroupTag::Tetrahedral => &["1", "1′", "1″", "3"],
        SubgroupTag::Octahedral => &["1", "1′", "2", "3", "3′"],
        SubgroupTag::Icosahedral => &["1", "3", "3′", "4", "5"],
        t => return Err(Error::Unsupported(format!("numeric labelling for {t}"))),
    };
    let c3 = find_axis([1.0, 1.0, 1.0], TAU / 3.0)?;
    let c4 = if g.tag() == SubgroupTag::Octahedral { Some(find_axis([0.0, 0.0, 1.0], TAU / 4.0)?) } else { None };
    let c5 = if g.tag() == SubgroupTag::Icosahedral {
        Some(find_axis([0.0, 1.0, 0.5 * (1.0 + 5f64.sqrt())], TAU / 5.0)?)
    } else {
        None
    };
    for mut ir in irreps {
        let label = if is_trivial(&ir) {
            "1"
        } else {
            match (g.tag(), ir.dim) {
                (SubgroupTag::Tetrahedral, 1) => {
                    if ir.characters[c3].arg() > 0.0 {
                        "1′"
                    } else {
                        "1″"
                    }
                }
                (SubgroupTag::Octahedral, 1) => "1′",
                (SubgroupTag::Octahedral, 3) => {
                    if ir.characters[c4.unwrap()].re > 0.0 {
                        "3"
                    } else {
                        "3′"
                    }
                }
                (SubgroupTag::Icosahedral, 3) => {
                    // The defining representation has χ = 1 + 2cos(2π/5) > 0.
                    if ir.characters[c5.unwrap()].re > 0.0 {
                        "3"
                    } else {
                        "3′"
                    }
                }
                (_, 2) => "2",
                (_, 3) => "3",
                (_, 4) => "4",
                (_, 5) => "5",
                _ => return Err(Error::Numerical("unexpected irrep dimension".into())),
            }
        };
        ir.label = label.to_string();
        let pos = order.iter().position(|l| *l == label).expect("known label");
        if labelled.iter().any(|(p, _)| *p == pos) {
            return Err(Error::Numerical(format!("two irreps labelled {label}")));
        }
        labelled.push((pos, ir));
    }
    labelled.sort_by_key(|(p, _)| *p);
    Ok(labelled.into_iter().map(|(_, i)| i).collect())
}

/// Multiplicity of each irrep of `table` in the restriction of `D^ℓ`.
pub fn branch_multiplicities(ell: usize, table: &IrrepTable) -> Result<Vec<usize>> {
    let g = &table.group;
    let chi_l: Vec<f64> = g.elements().iter().map(|r| character(ell, r.angle())).collect();
    table
        .irreps
        .iter()
        .map(|ir| {
            let s: Complex64 = chi_l.iter().zip(&ir.characters).map(|(a, b)| b.conj() * *a).sum();
            to_multiplicity(s / g.order() as f64)
        })
        .collect()
}

fn to_multiplicity(z: Complex64) -> Result<usize> {
    let r = z.re.round();
    if (z.re - r).abs() > 1e-9 || z.im.abs() > 1e-9 || r < 0.0 {
        return Err(Error::Numerical(format!("character inner product {z} is not a multiplicity")));
    }
    Ok(r as usize)
}

/// `D^ℓ` restricted to `K`, as `(label, multiplicity)` with zero entries dropped.
pub fn branch(ell: usize, k: &IrrepTable) -> Result<Vec<(String, usize)>> {
    Ok(branch_multiplicities(ell, k)?
        .into_iter()
        .zip(&k.irreps)
        .filter(|(m, _)| *m > 0)
        .map(|(m, i)| (i.label.clone(), m))
        .collect())
}

/// `res[κ][λ]`: multiplicity of the `H`-irrep `λ` in the restriction of the
/// `K`-irrep `κ`.
pub fn restriction(k: &IrrepTable, h: &IrrepTable) -> Result<Vec<Vec<usize>>> {
    let emb = h.group.embedding(&k.group)?;
    k.irreps
        .iter()
        .map(|kap| {
            h.irreps
                .iter()
                .map(|lam| {
                    let s: Complex64 = emb
                        .iter()
                        .enumerate()
                        .map(|(hi, &ki)| kap.characters[ki] * lam.characters[hi].conj())
                        .sum();
                    to_multiplicity(s / h.group.order() as f64)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KBranch {
    pub kappa: String,
    pub multiplicity: usize,
    pub dim: usize,
    /// Restriction of this `K`-irrep to `H`.
    pub to_h: Vec<(String, usize)>,
}

/// The chain `SO(3) → K → H` for one `ℓ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchReport {
    pub ell: usize,
    pub k: String,
    pub h: String,
    pub chain: Vec<KBranch>,
    /// Direct restriction `SO(3) → H`.
    pub to_h: Vec<(String, usize)>,
}

impl BranchReport {
    /// Checks `2ℓ+1 = Σ mult·d_κ` and `d_κ = Σ mult·d_λ`.
    pub fn dimensions_consistent(&self, k: &IrrepTable, h: &IrrepTable) -> bool {
        let dim_of = |t: &IrrepTable, l: &str| t.irreps.iter().find(|i| i.label == l).map(|i| i.dim).unwrap_or(0);
        let top: usize = self.chain.iter().map(|b| b.multiplicity * b.dim).sum();
        top == 2 * self.ell + 1
            && self.chain.iter().all(|b| {
                b.dim == dim_of(k, &b.kappa) && b.to_h.iter().map(|(l, m)| m * dim_of(h, l)).sum::<usize>() == b.dim
            })
    }
}

pub fn branch_report(ell: usize, k: &IrrepTable, h: &IrrepTable) -> Result<BranchReport> {
    let res = restriction(k, h)?;
    let mk = branch_multiplicities(ell, k)?;
    let chain = mk
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0)
        .map(|(ki, &m)| KBranch {
            kappa: k.irreps[ki].label.clone(),
            multiplicity: m,
            dim: k.irreps[ki].dim,
            to_h: res[ki]
                .iter()
                .enumerate()
                .filter(|(_, x)| **x > 0)
                .map(|(li, &x)| (h.irreps[li].label.clone(), x))
                .collect(),
        })
        .collect();
    Ok(BranchReport {
        ell,
        k: k.group.tag().to_string(),
        h: h.group.tag().to_string(),
        chain,
        to_h: branch(ell, h)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Correctable,
    DetectableOnly,
    Undetectable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KickVerdict {
    pub ell: usize,
    pub verdict: Verdict,
    /// The verdict only accounts for kicks with `ℓ' ≤ l_max`.
    pub within_window: usize,
    pub reason: String,
}

/// Classifies momentum kicks of each `ℓ ≤ l_max` for the code `H ⊂ K`.
///
/// A kick is undetectable when some nontrivial `K`-irrep in its branching
/// contains the trivial `H`-irrep. Kicks up to `ℓ` are correctable when none of
/// them is undetectable and no nontrivial `H`-irrep is reached through two
/// different `K`-irreps by kicks `ℓ', ℓ'' ≤ ℓ`. These are the paper-level
/// criteria; no completeness claim beyond them is made.
pub fn classify_kicks(h: &FiniteSubgroup, k: &FiniteSubgroup, l_max: usize) -> Result<Vec<KickVerdict>> {
    let kt = irrep_table(k)?;
    let ht = irrep_table(h)?;
    let res = restriction(&kt, &ht)?;
    let mut reached: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut broken: Option<String> = None;
    let mut out = Vec::with_capacity(l_max + 1);
    for ell in 0..=l_max {
        let mk = branch_multiplicities(ell, &kt)?;
        let mut undetectable = None;
        for (ki, &m) in mk.iter().enumerate() {
            if m == 0 {
                continue;
            }
            if ki != 0 && res[ki][0] > 0 {
                undetectable = Some(kt.irreps[ki].label.clone());
            }
            for (li, &x) in res[ki].iter().enumerate().skip(1) {
                if x > 0 {
                    reached.entry(li).or_default().insert(ki);
                }
            }
        }
        if broken.is_none() {
            if let Some(kap) = &undetectable {
                broken = Some(format!("ℓ={ell} reaches the trivial {} irrep through {kap}", h.tag()));
            } else if let Some((li, ks)) = reached.iter().find(|(_, ks)| ks.len() > 1) {
                let names: Vec<&str> = ks.iter().map(|&i| kt.irreps[i].label.as_str()).collect();
                broken = Some(format!(
                    "{} irrep {} is reached through {} by kicks up to ℓ={ell}",
                    h.tag(),
                    ht.irreps[*li].label,
                    names.join(" and ")
                ));
            }
        }
        let (verdict, reason) = match (&undetectable, &broken) {
            (Some(kap), _) => (
                Verdict::Undetectable,
                format!("{kap} of {} contains the trivial irrep of {}", k.tag(), h.tag()),
            ),
            (None, None) => (Verdict::Correctable, "no undetectable kick and no pair conflict".to_string()),
            (None, Some(why)) => (Verdict::DetectableOnly, why.clone()),
        };
        out.push(KickVerdict { ell, verdict, within_window: l_max, reason });
    }
    Ok(out)
}

/// `ℓ ≤ l_max` whose restriction to `H` contains the trivial irrep.
pub fn reciprocal_space(h: &FiniteSubgroup, l_max: usize) -> Result<Vec<usize>> {
    let t = irrep_table(h)?;
    let mut out = Vec::new();
    for ell in 0..=l_max {
        if branch_multiplicities(ell, &t)?[0] > 0 {
            out.push(ell);
        }
    }
    Ok(out)
}

/// Reciprocal space of `Z_N` inside U(1): the multiples of `N` in `[−l_max, l_max]`.
pub fn reciprocal_space_u1(n: usize, l_max: i64) -> Vec<i64> {
    (-l_max..=l_max).filter(|l| l.rem_euclid(n as i64) == 0).collect()
}

/// `Z^ℓ(K) = (1/|K|) Σ_k D^ℓ(k)`.
pub fn twirl_d(ell: usize, k: &FiniteSubgroup) -> CMat {
    let dim = 2 * ell + 1;
    let mut acc = CMat::zeros(dim, dim);
    for r in k.elements() {
        acc += wigner_d(ell, r).as_matrix();
    }
    acc / Complex64::from(k.order() as f64)
}

/// A unitary change of basis making `D^ℓ(h)` block diagonal over `H`.
#[derive(Clone, Debug)]
pub struct AdmissibleBasis {
    pub ell: usize,
    /// Columns are the new basis vectors in the `|ℓ, m⟩` basis.
    pub change: CMat,
    /// `(label, dim, offset)` for each irreducible block.
    pub blocks: Vec<(String, usize, usize)>,
}

impl AdmissibleBasis {
    /// `U† D^ℓ(R) U`.
    pub fn conjugate(&self, r: &Rotation) -> CMat {
        self.change.adjoint() * wigner_d(self.ell, r).as_matrix() * &self.change
    }
}

/// Blocks appear in irrep-table order, copies of the same irrep adjacent.
/// For cyclic `H` the `|ℓ, m⟩` basis is already admissible and is returned
/// unchanged, with one block per `m`.
pub fn admissible_basis(ell: usize, h: &FiniteSubgroup) -> Result<AdmissibleBasis> {
    let dim = 2 * ell + 1;
    if let SubgroupTag::Cyclic(n) = h.tag() {
        let blocks = (0..dim)
            .map(|i| ((i as i64 - ell as i64).rem_euclid(n as i64).to_string(), 1, i))
            .collect();
        return Ok(AdmissibleBasis { ell, change: CMat::identity(dim, dim), blocks });
    }
    let t = irrep_table(h)?;
    let ds: Vec<CMat> = h.elements().iter().map(|r| wigner_d(ell, r).into_matrix()).collect();
    let proj = |ir: &Irrep, mu: usize, nu: usize| -> CMat {
        let mut p = CMat::zeros(dim, dim);
        for (z, d) in ir.matrices.iter().zip(&ds) {
            p += d * z[(mu, nu)].conj();
        }
        p * Complex64::from(ir.dim as f64 / h.order() as f64)
    };
    let mut cols: Vec<na::DVector<Complex64>> = Vec::new();
    let mut blocks = Vec::new();
    for ir in &t.irreps {
        let p11 = proj(ir, 0, 0);
        let eig = na::SymmetricEigen::new(p11);
        let mut idx: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        idx.sort_unstable();
        let pmu: Vec<CMat> = (0..ir.dim).map(|mu| proj(ir, mu, 0)).collect();
        for i in idx {
            let u = eig.eigenvectors.column(i).into_owned();
            blocks.push((ir.label.clone(), ir.dim, cols.len()));
            for p in &pmu {
                let v = p * &u;
                let n = v.norm();
                cols.push(v / Complex64::from(n));
            }
        }
    }
    if cols.len() != dim {
        return Err(Error::Numerical(format!("admissible basis has {} vectors, expected {dim}", cols.len())));
    }
    Ok(AdmissibleBasis { ell, change: CMat::from_columns(&cols), blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn group(tag: SubgroupTag) -> FiniteSubgroup {
        FiniteSubgroup::new(tag).unwrap()
    }

    fn table(tag: SubgroupTag) -> IrrepTable {
        irrep_table(&group(tag)).unwrap()
    }

    fn pairs(v: &[(&str, usize)]) -> Vec<(String, usize)> {
        v.iter().map(|(l, m)| (l.to_string(), *m)).collect()
    }

    #[test]
    fn labels_and_dimensions() {
        assert_eq!(table(SubgroupTag::Cyclic(3)).labels(), ["0", "1", "2"]);
        assert_eq!(table(SubgroupTag::Dihedral(3)).labels(), ["1", "1′", "2_1"]);
        assert_eq!(table(SubgroupTag::Dihedral(6)).labels(), ["1", "1′", "1+", "1-", "2_1", "2_2"]);
        assert_eq!(table(SubgroupTag::Tetrahedral).labels(), ["1", "1′", "1″", "3"]);
        assert_eq!(table(SubgroupTag::Octahedral).labels(), ["1", "1′", "2", "3", "3′"]);
        assert_eq!(table(SubgroupTag::Icosahedral).labels(), ["1", "3", "3′", "4", "5"]);
    }

    #[test]
    fn representations_are_homomorphisms() {
        for tag in [SubgroupTag::Dihedral(5), SubgroupTag::Dihedral(6), SubgroupTag::Tetrahedral, SubgroupTag::Octahedral, SubgroupTag::Icosahedral] {
            let t = table(tag);
            let g = &t.group;
            for ir in &t.irreps {
                for i in 0..g.order() {
                    let u = &ir.matrices[i];
                    let defect = (u * u.adjoint() - CMat::identity(ir.dim, ir.dim)).norm();
                    assert!(defect < 1e-10);
                    for j in 0..g.order() {
                        let prod = &ir.matrices[i] * &ir.matrices[j];
                        assert!((prod - &ir.matrices[g.mul(i, j)]).norm() < 1e-9, "{tag} {}", ir.label);
                    }
                }
            }
        }
    }

    #[test]
    fn great_orthogonality() {
        for tag in [SubgroupTag::Dihedral(4), SubgroupTag::Tetrahedral, SubgroupTag::Octahedral] {
            let t = table(tag);
            let n = t.group.order() as f64;
            for a in &t.irreps {
                for b in &t.irreps {
                    for (mu, nu, mp, np) in [(0, 0, 0, 0), (0, 1, 0, 1), (1, 0, 0, 1), (1, 1, 1, 1)] {
                        if mu.max(nu) >= a.dim || mp.max(np) >= b.dim {
                            continue;
                        }
                        let s: Complex64 =
                            a.matrices.iter().zip(&b.matrices).map(|(x, y)| x[(mu, nu)].conj() * y[(mp, np)]).sum();
                        let same = a.label == b.label && mu == mp && nu == np;
                        let want = if same { n / a.dim as f64 } else { 0.0 };
                        assert!((s - want).norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn dihedral_two_dim_matches_reflection_form() {
        let t = table(SubgroupTag::Dihedral(3));
        let two = &t.irreps[2];
        // s_1 is σ_x; rotations are diag(ω^h, ω^{−h}).
        let s1 = &two.matrices[3 + 1];
        assert!((s1[(0, 1)] - 1.0).norm() < 1e-15 && (s1[(1, 0)] - 1.0).norm() < 1e-15);
        let w = Complex64::from_polar(1.0, TAU / 3.0);
        assert!((two.matrices[1][(0, 0)] - w).norm() < 1e-15);
    }

    #[test]
    fn branching_o_and_t() {
        let o = table(SubgroupTag::Octahedral);
        let t = table(SubgroupTag::Tetrahedral);
        assert_eq!(branch(1, &o).unwrap(), pairs(&[("3", 1)]));
        assert_eq!(branch(1, &t).unwrap(), pairs(&[("3", 1)]));
        assert_eq!(branch(2, &o).unwrap(), pairs(&[("2", 1), ("3′", 1)]));
        assert_eq!(branch(2, &t).unwrap(), pairs(&[("1′", 1), ("1″", 1), ("3", 1)]));
        assert_eq!(branch(3, &o).unwrap(), pairs(&[("1′", 1), ("3", 1), ("3′", 1)]));
        let rep = branch_report(3, &o, &t).unwrap();
        assert!(rep.dimensions_consistent(&o, &t));
        assert_eq!(rep.chain[0].to_h, pairs(&[("1", 1)]));
    }

    #[test]
    fn branching_d6_and_d3() {
        let d6 = table(SubgroupTag::Dihedral(6));
        let d3 = table(SubgroupTag::Dihedral(3));
        assert_eq!(branch(1, &d6).unwrap(), pairs(&[("1′", 1), ("2_1", 1)]));
        assert_eq!(branch(2, &d6).unwrap(), pairs(&[("1", 1), ("2_1", 1), ("2_2", 1)]));
        assert_eq!(branch(3, &d6).unwrap(), pairs(&[("1′", 1), ("1+", 1), ("1-", 1), ("2_1", 1), ("2_2", 1)]));
        let res = restriction(&d6, &d3).unwrap();
        // 1+ of D6 restricts to the trivial irrep of D3.
        assert_eq!(res[2], vec![1, 0, 0]);
        assert_eq!(res[3], vec![0, 1, 0]);
        assert_eq!(res[4], vec![0, 0, 1]);
        assert_eq!(res[5], vec![0, 0, 1]);
    }

    #[test]
    fn kick_classification() {
        use Verdict::*;
        for n in [3usize, 4, 5, 6, 7, 8, 9, 10, 11, 12] {
            let v = classify_kicks(&group(SubgroupTag::Cyclic(n)), &group(SubgroupTag::Cyclic(2 * n)), n + 2).unwrap();
            for kv in &v {
                assert_eq!(kv.verdict == Correctable, 2 * kv.ell < n, "N={n} ℓ={}", kv.ell);
            }
        }
        let v = classify_kicks(&group(SubgroupTag::Tetrahedral), &group(SubgroupTag::Octahedral), 5).unwrap();
        let got: Vec<Verdict> = v.iter().map(|k| k.verdict).collect();
        assert_eq!(got, [Correctable, Correctable, DetectableOnly, Undetectable, DetectableOnly, DetectableOnly]);
        let v = classify_kicks(&group(SubgroupTag::Dihedral(3)), &group(SubgroupTag::Dihedral(6)), 3).unwrap();
        let got: Vec<Verdict> = v.iter().map(|k| k.verdict).collect();
        assert_eq!(got, [Correctable, Correctable, DetectableOnly, Undetectable]);
    }

    #[test]
    fn reciprocal_spaces() {
        assert_eq!(reciprocal_space_u1(3, 7), vec![-6, -3, 0, 3, 6]);
        let t = reciprocal_space(&group(SubgroupTag::Tetrahedral), 8).unwrap();
        assert_eq!(t, vec![0, 3, 4, 6, 7, 8]);
        assert_eq!(reciprocal_space(&group(SubgroupTag::Cyclic(1)), 4).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn twirls() {
        let z3 = group(SubgroupTag::Cyclic(3));
        let z = twirl_d(4, &z3);
        for i in 0..9 {
            for j in 0..9 {
                let m = i as i64 - 4;
                let want = if i == j && m.rem_euclid(3) == 0 { 1.0 } else { 0.0 };
                assert!((z[(i, j)] - want).norm() < 1e-12);
            }
        }
        for tag in [SubgroupTag::Tetrahedral, SubgroupTag::Octahedral, SubgroupTag::Dihedral(4)] {
            let g = group(tag);
            let t = irrep_table(&g).unwrap();
            for l in 0..8 {
                let z = twirl_d(l, &g);
                assert!((&z * &z - &z).norm() < 1e-10);
                let mult = branch_multiplicities(l, &t).unwrap()[0] as f64;
                assert!((z.trace() - mult).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn admissible_bases_block_diagonalise() {
        let a = admissible_basis(3, &group(SubgroupTag::Cyclic(3))).unwrap();
        assert_eq!(a.change, CMat::identity(7, 7));
        for (tag, ell) in [(SubgroupTag::Dihedral(3), 2), (SubgroupTag::Tetrahedral, 3), (SubgroupTag::Octahedral, 4), (SubgroupTag::Dihedral(6), 3)] {
            let g = group(tag);
            let t = irrep_table(&g).unwrap();
            let a = admissible_basis(ell, &g).unwrap();
            let dim = 2 * ell + 1;
            assert!((a.change.adjoint() * &a.change - CMat::identity(dim, dim)).norm() < 1e-10);
            assert_eq!(a.blocks.iter().map(|b| b.1).sum::<usize>(), dim);
            for (gi, r) in g.elements().iter().enumerate() {
                let m = a.conjugate(r);
                for (label, d, off) in &a.blocks {
                    let zeta = &t.irreps[t.index_of(label).unwrap()].matrices[gi];
                    for i in 0..dim {
                        for j in 0..*d {
                            let want = if (*off..off + d).contains(&i) { zeta[(i - off, j)] } else { Complex64::zero() };
                            assert!((m[(i, off + j)] - want).norm() < 1e-9, "{tag} ℓ={ell}");
                        }
                    }
                }
            }
        }
        let a = admissible_basis(2, &group(SubgroupTag::Dihedral(3))).unwrap();
        let labels: Vec<&str> = a.blocks.iter().map(|b| b.0.as_str()).collect();
        assert_eq!(labels, ["1", "2_1", "2_1"]);
    }

    proptest! {
        #[test]
        fn branch_dimensions_add_up(ell in 0usize..20, which in 0usize..5) {
            let tag = [SubgroupTag::Cyclic(4), SubgroupTag::Dihedral(5), SubgroupTag::Tetrahedral,
                       SubgroupTag::Octahedral, SubgroupTag::Icosahedral][which];
            let t = table(tag);
            let m = branch_multiplicities(ell, &t).unwrap();
            let total: usize = m.iter().zip(&t.irreps).map(|(m, i)| m * i.dim).sum();
            prop_assert_eq!(total, 2 * ell + 1);
        }
    }
}
