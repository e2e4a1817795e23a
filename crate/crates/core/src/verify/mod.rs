//! Independent oracles and certification: the quantum double reference
//! state, its stabilizers, ground-state degeneracy and the operator-identity
//! suite.
//!
//! The oracle and the stabilizers are built from the group tables alone and
//! never touch the gate or map machinery.

mod identities;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::cellulation::{Cellulation, Orientation};
use crate::error::{Error, Result};
use crate::groups::{irrep_table, FactorSystem, FiniteGroup};
use crate::kwmaps::OutcomeRecord;
use crate::register::{LocalOperator, QuditRegister, Role, Site, SiteKey};

pub use identities::{check_identity, run_identity_suite, IdentityRow, IDENTITY_IDS, IDENTITY_TOL};

/// Default cap on the number of vertex assignments the oracle enumerates.
pub const ORACLE_BUDGET: usize = 1_000_000;
/// Cap on the edge Hilbert dimension for dense projector work.
pub const DENSE_BUDGET: usize = 4096;
/// Eigenvalues at or above this count towards the ground space.
pub const GSD_THRESHOLD: f64 = 1.0 - 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Mixed-radix labels of `idx`, most significant first.
fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

fn index(labels: &[usize], dims: &[usize]) -> usize {
    labels.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

fn edge_sites(group: &Arc<FiniteGroup>, cell: &Cellulation) -> Vec<Site> {
    (0..cell.num_edges()).map(|e| Site { key: SiteKey::edge(e), group: group.clone() }).collect()
}

/// `Σ_{g_v} ⊗_e |ḡ_{i_e} g_{f_e}⟩`, normalized, on the `edge(e)` sites.
pub fn oracle_double_state(group: &Arc<FiniteGroup>, cell: &Cellulation) -> Result<QuditRegister> {
    oracle_with_budget(group, cell, ORACLE_BUDGET)
}

pub fn oracle_with_budget(group: &Arc<FiniteGroup>, cell: &Cellulation, budget: usize) -> Result<QuditRegister> {
    let d = group.order();
    let (nv, ne) = (cell.num_vertices(), cell.num_edges());
    let needed = (d as u128).saturating_pow(nv as u32);
    let edim = (d as u128).saturating_pow(ne as u32);
    if needed > budget as u128 || edim > budget as u128 {
        return Err(Error::BudgetExceeded { needed: needed.max(edim).min(usize::MAX as u128) as usize, budget });
    }
    let mut amps = vec![ZERO; edim as usize];
    let mut gv = vec![0usize; nv];
    loop {
        let idx = cell.edges().iter().fold(0, |acc, &(i, f)| acc * d + group.mul(group.inv(gv[i]), gv[f]));
        amps[idx] += ONE;
        // odometer step
        let mut k = nv;
        loop {
            if k == 0 {
                let mut reg = QuditRegister::from_amplitudes(edge_sites(group, cell), amps)?;
                reg.normalize();
                return Ok(reg);
            }
            k -= 1;
            gv[k] += 1;
            if gv[k] < d {
                break;
            }
            gv[k] = 0;
        }
    }
}

/// Edges at `v` in ascending order, each flagged `true` when it enters `v`.
fn star(cell: &Cellulation, v: usize) -> Vec<(usize, bool)> {
    cell.edges()
        .iter()
        .enumerate()
        .filter_map(|(e, &(i, f))| {
            if f == v {
                Some((e, true))
            } else if i == v {
                Some((e, false))
            } else {
                None
            }
        })
        .collect()
}

/// `A^g_v = Π_{e→v} R^g_e Π_{e←v} L^g_e` as a permutation on the edges at `v`.
pub fn vertex_term(group: &FiniteGroup, cell: &Cellulation, v: usize, g: usize) -> (LocalOperator, Vec<SiteKey>) {
    let st = star(cell, v);
    let dims = vec![group.order(); st.len()];
    let total: usize = dims.iter().product();
    let gi = group.inv(g);
    let image = (0..total)
        .map(|j| {
            let mut x = digits(j, &dims);
            for (k, &(_, entering)) in st.iter().enumerate() {
                x[k] = if entering { group.mul(x[k], gi) } else { group.mul(g, x[k]) };
            }
            index(&x, &dims)
        })
        .collect();
    (LocalOperator::permutation(dims, image), st.iter().map(|&(e, _)| SiteKey::edge(e)).collect())
}

/// `A_v = (1/|G|) Σ_g A^g_v` as a dense operator on the edges at `v`.
pub fn vertex_stabilizer(group: &FiniteGroup, cell: &Cellulation, v: usize) -> Result<(LocalOperator, Vec<SiteKey>)> {
    let st = star(cell, v);
    let dim = group.order().pow(st.len() as u32);
    if dim > DENSE_BUDGET {
        return Err(Error::BudgetExceeded { needed: dim, budget: DENSE_BUDGET });
    }
    let w = 1.0 / group.order() as f64;
    let mut m = vec![ZERO; dim * dim];
    let mut keys = Vec::new();
    for g in group.elements() {
        let (op, k) = vertex_term(group, cell, v, g);
        keys = k;
        let crate::register::OpKind::Monomial { image, .. } = op.kind() else { unreachable!() };
        for (c, &r) in image.iter().enumerate() {
            m[r * dim + c] += w;
        }
    }
    Ok((LocalOperator::dense(vec![group.order(); st.len()], m), keys))
}

/// Distinct edges of a walk in ascending order, and the slot of each step.
fn walk_slots(walk: &[(usize, Orientation)]) -> (Vec<usize>, Vec<usize>) {
    let edges: Vec<usize> = walk.iter().map(|s| s.0).collect::<BTreeSet<_>>().into_iter().collect();
    let slots = walk.iter().map(|s| edges.binary_search(&s.0).unwrap()).collect();
    (edges, slots)
}

/// Ordered product `Π g_e^{O_e}` along a walk.
fn holonomy(group: &FiniteGroup, walk: &[(usize, Orientation)], slots: &[usize], x: &[usize]) -> usize {
    walk.iter().zip(slots).fold(group.identity(), |acc, (&(_, o), &s)| {
        let g = if o == 1 { x[s] } else { group.inv(x[s]) };
        group.mul(acc, g)
    })
}

/// `B_p = δ(Π_{e∈∂p} g_e^{O_e} = 1)`, diagonal on the distinct boundary edges.
pub fn plaquette_stabilizer(group: &FiniteGroup, cell: &Cellulation, p: usize) -> (LocalOperator, Vec<SiteKey>) {
    holonomy_projector(group, cell.boundary(p), group.identity())
}

/// Diagonal projector onto walk holonomy `h`.
pub fn holonomy_projector(
    group: &FiniteGroup,
    walk: &[(usize, Orientation)],
    h: usize,
) -> (LocalOperator, Vec<SiteKey>) {
    let (edges, slots) = walk_slots(walk);
    let dims = vec![group.order(); edges.len()];
    let total: usize = dims.iter().product();
    let phase =
        (0..total).map(|j| if holonomy(group, walk, &slots, &digits(j, &dims)) == h { ONE } else { ZERO }).collect();
    (LocalOperator::diagonal(dims, phase), edges.into_iter().map(SiteKey::edge).collect())
}

/// `⟨A_v⟩`, averaged over the permutations `A^g_v`.
pub fn vertex_expectation(reg: &QuditRegister, group: &FiniteGroup, cell: &Cellulation, v: usize) -> Result<Complex64> {
    weighted_vertex_expectation(reg, group, cell, v, |_| ONE)
}

/// `(1/|G|) Σ_g w(g) ⟨A^g_v⟩`
fn weighted_vertex_expectation(
    reg: &QuditRegister,
    group: &FiniteGroup,
    cell: &Cellulation,
    v: usize,
    w: impl Fn(usize) -> Complex64,
) -> Result<Complex64> {
    let mut s = ZERO;
    for g in group.elements() {
        let (op, keys) = vertex_term(group, cell, v, g);
        s += w(g) * reg.expectation(&op, &keys)?;
    }
    Ok(s / group.order() as f64)
}

pub fn plaquette_expectation(
    reg: &QuditRegister,
    group: &FiniteGroup,
    cell: &Cellulation,
    p: usize,
) -> Result<Complex64> {
    let (op, keys) = plaquette_stabilizer(group, cell, p);
    reg.expectation(&op, &keys)
}

/// Rank of `Π_v A_v Π_p B_p` on the edge space, from its spectrum.
pub fn ground_state_degeneracy(group: &Arc<FiniteGroup>, cell: &Cellulation) -> Result<usize> {
    let p = projector_matrix(group, cell)?;
    let eig = SymmetricEigen::new(p);
    Ok(eig.eigenvalues.iter().filter(|&&x| x >= GSD_THRESHOLD).count())
}

/// The dense ground-space projector, built column by column.
pub fn projector_matrix(group: &FiniteGroup, cell: &Cellulation) -> Result<DMatrix<f64>> {
    let d = group.order();
    let ne = cell.num_edges();
    let dim = (d as u128).saturating_pow(ne as u32);
    if dim > DENSE_BUDGET as u128 {
        return Err(Error::BudgetExceeded { needed: dim.min(usize::MAX as u128) as usize, budget: DENSE_BUDGET });
    }
    let dim = dim as usize;
    let dims = vec![d; ne];
    // full-space permutations for every A^g_v
    let mut moves: Vec<Vec<Vec<usize>>> = Vec::with_capacity(cell.num_vertices());
    for v in 0..cell.num_vertices() {
        let st = star(cell, v);
        let per_g = group
            .elements()
            .map(|g| {
                let gi = group.inv(g);
                (0..dim)
                    .map(|j| {
                        let mut x = digits(j, &dims);
                        for &(e, entering) in &st {
                            x[e] = if entering { group.mul(x[e], gi) } else { group.mul(g, x[e]) };
                        }
                        index(&x, &dims)
                    })
                    .collect()
            })
            .collect();
        moves.push(per_g);
    }
    let flat: Vec<bool> = (0..dim)
        .map(|j| {
            let x = digits(j, &dims);
            (0..cell.num_plaquettes()).all(|p| {
                let walk = cell.boundary(p);
                let step = walk
                    .iter()
                    .fold(group.identity(), |acc, &(e, o)| group.mul(acc, if o == 1 { x[e] } else { group.inv(x[e]) }));
                step == group.identity()
            })
        })
        .collect();
    let w = 1.0 / d as f64;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for c in 0..dim {
        if !flat[c] {
            continue;
        }
        let mut col = vec![0.0; dim];
        col[c] = 1.0;
        for per_g in &moves {
            let mut next = vec![0.0; dim];
            for img in per_g {
                for (j, &x) in col.iter().enumerate() {
                    if x != 0.0 {
                        next[img[j]] += w * x;
                    }
                }
            }
            col = next;
        }
        for (r, x) in col.into_iter().enumerate() {
            m[(r, c)] = x;
        }
    }
    Ok(m)
}

/// Commuting pairs `(a, b)` up to simultaneous conjugation.
pub fn commuting_pair_orbits(group: &FiniteGroup) -> usize {
    let n = group.order();
    let mut seen = vec![false; n * n];
    let mut orbits = 0;
    for a in 0..n {
        for b in 0..n {
            if seen[a * n + b] || group.mul(a, b) != group.mul(b, a) {
                continue;
            }
            orbits += 1;
            for g in 0..n {
                seen[group.conj(g, a) * n + group.conj(g, b)] = true;
            }
        }
    }
    orbits
}

/// Closed walks: every plaquette boundary, then one fundamental cycle per
/// non-tree edge.
pub fn loops(cell: &Cellulation) -> Result<Vec<Vec<(usize, Orientation)>>> {
    let mut out: Vec<Vec<(usize, Orientation)>> =
        (0..cell.num_plaquettes()).map(|p| cell.boundary(p).to_vec()).collect();
    let tree = cell.spanning_tree()?;
    let tree_edges: BTreeSet<usize> = tree.edges().into_iter().collect();
    // steps from v up to the root
    let up = |v: usize| {
        let mut steps = Vec::new();
        let mut x = v;
        while let Some((e, p)) = tree.parent(x) {
            steps.push((e, if cell.edge(e) == (x, p) { 1 } else { -1 }));
            x = p;
        }
        steps
    };
    for (e, &(i, f)) in cell.edges().iter().enumerate() {
        if tree_edges.contains(&e) {
            continue;
        }
        let (mut from_f, mut from_i) = (up(f), up(i));
        while let (Some(a), Some(b)) = (from_f.last(), from_i.last()) {
            if a.0 != b.0 {
                break;
            }
            from_f.pop();
            from_i.pop();
        }
        let mut walk = vec![(e, 1)];
        walk.extend(from_f);
        walk.extend(from_i.into_iter().rev().map(|(e, o)| (e, -o)));
        out.push(walk);
    }
    Ok(out)
}

/// A loop expectation `⟨tr Π Z^{μ^{O_e}}⟩` around a plaquette.
#[derive(Clone, Debug, Serialize)]
pub struct LoopValue {
    pub irrep: usize,
    pub dim: usize,
    pub plaquette: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilizerReport {
    pub vertex: Vec<f64>,
    pub plaquette: Vec<f64>,
    /// Empty when the group has no irrep data.
    pub loops: Vec<LoopValue>,
    pub fidelity: Option<f64>,
    pub gsd: Option<usize>,
    /// Largest imaginary part seen in any expectation.
    pub max_imag: f64,
}

impl StabilizerReport {
    /// Smallest `⟨A_v⟩` or `⟨B_p⟩`.
    pub fn min_stabilizer(&self) -> f64 {
        self.vertex.iter().chain(&self.plaquette).copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|⟨loop⟩ − d^μ|`.
    pub fn loop_defect(&self) -> f64 {
        self.loops.iter().map(|l| (l.value - l.dim as f64).abs()).fold(0.0, f64::max)
    }
}

/// Stabilizer expectations of a state on the `edge(e)` sites.
pub fn stabilizer_report(
    reg: &QuditRegister,
    group: &Arc<FiniteGroup>,
    cell: &Cellulation,
    with_oracle: bool,
    with_gsd: bool,
) -> Result<StabilizerReport> {
    let mut max_imag: f64 = 0.0;
    let mut real = |z: Complex64| {
        max_imag = max_imag.max(z.im.abs());
        z.re
    };
    let mut vertex = Vec::new();
    for v in 0..cell.num_vertices() {
        vertex.push(real(vertex_expectation(reg, group, cell, v)?));
    }
    let mut plaquette = Vec::new();
    for p in 0..cell.num_plaquettes() {
        plaquette.push(real(plaquette_expectation(reg, group, cell, p)?));
    }
    let mut loops = Vec::new();
    if let Ok(table) = irrep_table(group) {
        for (mu, irrep) in table.irreps().iter().enumerate() {
            for p in 0..cell.num_plaquettes() {
                let (edges, slots) = walk_slots(cell.boundary(p));
                let dims = vec![group.order(); edges.len()];
                let total: usize = dims.iter().product();
                let phase = (0..total)
                    .map(|j| {
                        let x = digits(j, &dims);
                        let mut m = DMatrix::<Complex64>::identity(irrep.dim(), irrep.dim());
                        for (&(_, o), &s) in cell.boundary(p).iter().zip(&slots) {
                            m *= irrep.matrix(if o == 1 { x[s] } else { group.inv(x[s]) });
                        }
                        m.trace()
                    })
                    .collect();
                let op = LocalOperator::diagonal(dims, phase);
                let keys: Vec<SiteKey> = edges.into_iter().map(SiteKey::edge).collect();
                let value = real(reg.expectation(&op, &keys)?);
                loops.push(LoopValue { irrep: mu, dim: irrep.dim(), plaquette: p, value });
            }
        }
    }
    let fidelity = if with_oracle { Some(reg.fidelity(&oracle_double_state(group, cell)?)?) } else { None };
    let gsd = if with_gsd { Some(ground_state_degeneracy(group, cell)?) } else { None };
    Ok(StabilizerReport { vertex, plaquette, loops, fidelity, gsd, max_imag })
}

/// Largest `1 − ⟨P⟩` over the syndrome projectors implied by a one-shot
/// nil-2 outcome record, on a state over the merged `edge(e)` sites. A
/// vertex with charge `a ∈ Q̂` should be fixed by `(1/|G|) Σ_g χ^a(π(g))* A^g_v`;
/// a plaquette with flux `b ∈ N` should carry holonomy `ι(b̄)`.
pub fn nil2_syndrome_deviation(
    state: &QuditRegister,
    fs: &FactorSystem,
    cell: &Cellulation,
    outcomes: &[OutcomeRecord],
) -> Result<f64> {
    let g = fs.parent();
    let chi = fs.q_group().require_pairing()?;
    let labels: HashMap<(Role, usize), usize> =
        outcomes.iter().map(|o| ((o.site.role, o.site.index), o.outcome)).collect();
    let label = |role: Role, i: usize| {
        labels.get(&(role, i)).copied().ok_or_else(|| Error::Register(format!("no outcome for {role:?} {i}")))
    };
    let mut worst: f64 = 0.0;
    for v in 0..cell.num_vertices() {
        let a = label(Role::Vertex, v)?;
        let z = weighted_vertex_expectation(state, g, cell, v, |x| chi.chi(a, fs.proj(x)).conj())?;
        worst = worst.max((1.0 - z).norm());
    }
    for p in 0..cell.num_plaquettes() {
        let b = label(Role::Plaquette, p)?;
        let target = fs.embed(fs.n_group().inv(b));
        let (op, keys) = holonomy_projector(g, cell.boundary(p), target);
        worst = worst.max((1.0 - state.expectation(&op, &keys)?).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::catalog;

    fn group(name: &str) -> Arc<FiniteGroup> {
        catalog::by_name(name).unwrap().group
    }

    #[test]
    fn oracle_on_single_edge_is_plus() {
        let z2 = group("Z2");
        let s = oracle_double_state(&z2, &Cellulation::single_edge()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - h).abs() < 1e-15 && (s.amplitudes()[1].re - h).abs() < 1e-15);
    }

    #[test]
    fn oracle_is_stabilized() {
        let cell = Cellulation::hexagon_torus();
        for name in ["Z2", "Z3", "S3", "D4"] {
            let g = group(name);
            let s = oracle_double_state(&g, &cell).unwrap();
            let r = stabilizer_report(&s, &g, &cell, false, false).unwrap();
            assert!(r.min_stabilizer() > 1.0 - 1e-10, "{name}");
            assert!(r.loop_defect() < 1e-10, "{name}");
            assert!(r.max_imag < 1e-10);
        }
    }

    #[test]
    fn pair_orbits() {
        let counts: Vec<usize> =
            ["Z2", "Z3", "S3", "D4", "Q8"].iter().map(|n| commuting_pair_orbits(&group(n))).collect();
        assert_eq!(counts, vec![4, 9, 8, 22, 22]);
    }

    #[test]
    fn budget_is_enforced() {
        let s4 = group("S4");
        let err = oracle_with_budget(&s4, &Cellulation::square_torus(2, 2).unwrap(), 1000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn fundamental_cycles_close() {
        let cell = Cellulation::hexagon_torus();
        let ls = loops(&cell).unwrap();
        assert_eq!(ls.len(), 3);
        for walk in &ls {
            let ends = |(e, o): (usize, Orientation)| {
                let (i, f) = cell.edge(e);
                if o == 1 {
                    (i, f)
                } else {
                    (f, i)
                }
            };
            for k in 0..walk.len() {
                assert_eq!(ends(walk[k]).1, ends(walk[(k + 1) % walk.len()]).0);
            }
        }
    }
}
