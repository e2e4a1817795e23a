use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{catalog, find_isomorphism, FiniteGroup};
use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

/// One irreducible unitary representation, tabulated on every element.
#[derive(Clone, Debug)]
pub struct Irrep {
    dim: usize,
    matrices: Vec<DMatrix<Complex64>>,
    characters: Vec<Complex64>,
}

impl Irrep {
    fn new(matrices: Vec<DMatrix<Complex64>>) -> Self {
        let dim = matrices[0].nrows();
        let characters = matrices.iter().map(|m| m.trace()).collect();
        Self { dim, matrices, characters }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ρ(g)`
    pub fn matrix(&self, g: usize) -> &DMatrix<Complex64> {
        &self.matrices[g]
    }

    /// `ρ(g)_{ij}`
    pub fn entry(&self, g: usize, i: usize, j: usize) -> Complex64 {
        self.matrices[g][(i, j)]
    }

    /// `χ(g) = tr ρ(g)`
    pub fn character(&self, g: usize) -> Complex64 {
        self.characters[g]
    }

    pub fn is_trivial(&self) -> bool {
        self.dim == 1 && self.characters.iter().all(|c| (c - 1.0).norm() < TOL)
    }
}

/// All irreps of a group, up to equivalence.
#[derive(Clone, Debug)]
pub struct IrrepTable {
    group: Arc<FiniteGroup>,
    irreps: Vec<Irrep>,
}

impl IrrepTable {
    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn irreps(&self) -> &[Irrep] {
        &self.irreps
    }

    pub fn len(&self) -> usize {
        self.irreps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.irreps.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.irreps.iter().map(Irrep::dim).collect()
    }

    /// Checks homomorphism, unitarity, `Σ d² = |G|` and character orthogonality.
    pub fn validate(&self) -> Result<()> {
        let g = &self.group;
        let n = g.order();
        let bad = |msg: String| Err(Error::InvalidGroup(format!("{}: {msg}", g.name())));
        let dsq: usize = self.irreps.iter().map(|r| r.dim * r.dim).sum();
        if dsq != n {
            return bad(format!("Σ d² = {dsq} ≠ {n}"));
        }
        for (mu, r) in self.irreps.iter().enumerate() {
            if r.matrices.len() != n {
                return bad(format!("irrep {mu} is not tabulated on every element"));
            }
            let id = DMatrix::<Complex64>::identity(r.dim, r.dim);
            for a in g.elements() {
                let m = &r.matrices[a];
                if max_abs(&(m.adjoint() * m - &id)) > TOL {
                    return bad(format!("irrep {mu} is not unitary at {a}"));
                }
                for b in g.elements() {
                    if max_abs(&(m * &r.matrices[b] - &r.matrices[g.mul(a, b)])) > TOL {
                        return bad(format!("irrep {mu} fails ρ({a})ρ({b}) = ρ({a}·{b})"));
                    }
                }
            }
        }
        for (mu, r) in self.irreps.iter().enumerate() {
            for (nu, s) in self.irreps.iter().enumerate() {
                let ip: Complex64 =
                    g.elements().map(|x| r.characters[x] * s.characters[x].conj()).sum::<Complex64>() / n as f64;
                let want = if mu == nu { 1.0 } else { 0.0 };
                if (ip - want).norm() > TOL {
                    return bad(format!("characters {mu}, {nu} are not orthonormal"));
                }
            }
        }
        Ok(())
    }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat2(e: [[Complex64; 2]; 2]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[e[0][0], e[0][1], e[1][0], e[1][1]])
}

fn scalar(x: f64) -> DMatrix<Complex64> {
    DMatrix::from_element(1, 1, c(x, 0.0))
}

/// Extends generator images to the whole group by walking the Cayley graph.
fn from_generators(g: &FiniteGroup, gens: &[(usize, DMatrix<Complex64>)]) -> Irrep {
    let d = gens[0].1.nrows();
    let mut mats: Vec<Option<DMatrix<Complex64>>> = vec![None; g.order()];
    mats[0] = Some(DMatrix::identity(d, d));
    let mut queue = VecDeque::from([0]);
    while let Some(x) = queue.pop_front() {
        for (gen, m) in gens {
            let y = g.mul(x, *gen);
            if mats[y].is_none() {
                mats[y] = Some(mats[x].as_ref().unwrap() * m);
                queue.push_back(y);
            }
        }
    }
    Irrep::new(mats.into_iter().map(|m| m.expect("generators generate")).collect())
}

/// Irreps of a reference model of each catalog non-abelian group, from
/// exact generator images.
fn reference_tables() -> Vec<(FiniteGroup, Vec<Irrep>)> {
    let h = 3f64.sqrt() / 2.0;
    let mut out = Vec::new();

    let s3 = catalog::symmetric_perm(3);
    let r = s3.index_of(&[1, 2, 0]);
    let s = s3.index_of(&[1, 0, 2]);
    let rot = mat2([[c(-0.5, 0.0), c(-h, 0.0)], [c(h, 0.0), c(-0.5, 0.0)]]);
    let refl = mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
    let irreps = vec![
        from_generators(&s3.group, &[(r, scalar(1.0)), (s, scalar(1.0))]),
        from_generators(&s3.group, &[(r, scalar(1.0)), (s, scalar(-1.0))]),
        from_generators(&s3.group, &[(r, rot), (s, refl.clone())]),
    ];
    out.push((s3.group, irreps));

    let d4 = catalog::dihedral_perm_group(4);
    let r = d4.index_of(&[1, 2, 3, 0]);
    let s = d4.index_of(&[0, 3, 2, 1]);
    let mut irreps = Vec::new();
    for (x, y) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        irreps.push(from_generators(&d4.group, &[(r, scalar(x)), (s, scalar(y))]));
    }
    let quarter = mat2([[c(0.0, 0.0), c(-1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
    irreps.push(from_generators(&d4.group, &[(r, quarter), (s, refl)]));
    out.push((d4.group, irreps));

    // index order 1, -1, i, -i, j, -j, k, -k
    let q8 = catalog::quaternion();
    let (qi, qj) = (2, 4);
    let mut irreps = Vec::new();
    for (x, y) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        irreps.push(from_generators(&q8, &[(qi, scalar(x)), (qj, scalar(y))]));
    }
    let mi = mat2([[c(0.0, 1.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]]);
    let mj = mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(-1.0, 0.0), c(0.0, 0.0)]]);
    irreps.push(from_generators(&q8, &[(qi, mi), (qj, mj)]));
    out.push((q8, irreps));

    let s3_irreps = out[0].1.clone();
    let s3 = catalog::symmetric_perm(3);
    for pg in [catalog::symmetric_perm(4), catalog::alternating_perm(4)] {
        let on_pairs: Vec<usize> = pg.perms.iter().map(|p| s3.index_of(&pair_partition_action(p))).collect();
        let std3: Vec<DMatrix<Complex64>> = pg.perms.iter().map(|p| standard_rep(p)).collect();
        let trivial = Irrep::new(vec![scalar(1.0); pg.perms.len()]);
        let mut irreps = vec![trivial];
        if pg.perms.len() == 24 {
            let sign: Vec<f64> = on_pairs.iter().zip(&pg.perms).map(|(_, p)| parity(p)).collect();
            irreps.push(Irrep::new(sign.iter().map(|&x| scalar(x)).collect()));
            irreps.push(Irrep::new(on_pairs.iter().map(|&k| s3_irreps[2].matrices[k].clone()).collect()));
            irreps.push(Irrep::new(std3.clone()));
            irreps.push(Irrep::new(std3.iter().zip(&sign).map(|(m, &x)| m * c(x, 0.0)).collect()));
        } else {
            // the image in S3 is A3; its 3-cycles carry cube roots of unity
            let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
            let cyc = s3.index_of(&[1, 2, 0]);
            for power in [1u32, 2] {
                let mats = on_pairs
                    .iter()
                    .map(|&k| {
                        let z = if k == 0 {
                            c(1.0, 0.0)
                        } else if k == cyc {
                            w.powu(power)
                        } else {
                            w.powu(2 * power)
                        };
                        DMatrix::from_element(1, 1, z)
                    })
                    .collect();
                irreps.push(Irrep::new(mats));
            }
            irreps.push(Irrep::new(std3));
        }
        out.push((pg.group, irreps));
    }
    out
}

fn parity(p: &[usize]) -> f64 {
    let inv = (0..p.len()).flat_map(|i| (i + 1..p.len()).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Action of a permutation of four points on the three pair partitions
/// `{01|23}, {02|13}, {03|12}`.
fn pair_partition_action(p: &[usize]) -> Vec<usize> {
    let partner_of_zero = |k: usize| k + 1;
    (0..3)
        .map(|k| {
            let (a, b) = (p[0], p[partner_of_zero(k)]);
            let other = if a == 0 {
                b
            } else if b == 0 {
                a
            } else {
                6 - a - b
            };
            other - 1
        })
        .collect()
}

/// The permutation matrix restricted to the sum-zero subspace, in the
/// Helmert basis.
fn standard_rep(p: &[usize]) -> DMatrix<Complex64> {
    let basis = DMatrix::from_row_slice(
        4,
        3,
        &[
            1.0 / 2f64.sqrt(),
            1.0 / 6f64.sqrt(),
            1.0 / 12f64.sqrt(),
            -1.0 / 2f64.sqrt(),
            1.0 / 6f64.sqrt(),
            1.0 / 12f64.sqrt(),
            0.0,
            -2.0 / 6f64.sqrt(),
            1.0 / 12f64.sqrt(),
            0.0,
            0.0,
            -3.0 / 12f64.sqrt(),
        ],
    );
    let mut perm = DMatrix::<f64>::zeros(4, 4);
    for (i, &j) in p.iter().enumerate() {
        perm[(j, i)] = 1.0;
    }
    (basis.transpose() * perm * basis).map(|x| c(x, 0.0))
}

/// Irreps of an abelian group (characters `χ^a`, indexed by `a`) or of a
/// group isomorphic to S3, D4, Q8, A4 or S4. Stored data is validated before use.
pub fn irrep_table(g: &Arc<FiniteGroup>) -> Result<IrrepTable> {
    let irreps = if let Some(p) = g.pairing() {
        g.elements()
            .map(|a| Irrep::new(g.elements().map(|b| DMatrix::from_element(1, 1, p.chi(a, b))).collect()))
            .collect()
    } else {
        let mut found = None;
        for (reference, irreps) in reference_tables() {
            if let Some(phi) = find_isomorphism(&reference, g) {
                let moved = irreps
                    .iter()
                    .map(|r| {
                        let mut mats = vec![DMatrix::zeros(0, 0); g.order()];
                        for x in reference.elements() {
                            mats[phi[x]] = r.matrices[x].clone();
                        }
                        Irrep::new(mats)
                    })
                    .collect::<Vec<_>>();
                found = Some(moved);
                break;
            }
        }
        found.ok_or_else(|| Error::Unsupported(format!("no irrep data for non-abelian group {}", g.name())))?
    };
    let table = IrrepTable { group: g.clone(), irreps };
    table.validate()?;
    Ok(table)
}
