//! Operator identities checked as exact maps. Each map is evaluated column
//! by column on basis inputs held as sparse expansions, and the deviation is
//! the largest entry difference over all columns.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{digits, loops, oracle_double_state, vertex_term, walk_slots, ONE};
use crate::cellulation::{Cellulation, Orientation};
use crate::error::{Error, Result};
use crate::gates;
use crate::groups::{
    center, factor_system_of, irrep_table, is_nil2_extension, normal_subgroups, FactorSystem, FiniteGroup, IrrepTable,
};
use crate::kwmaps::{
    edge_key, entangle_abelian, entangle_hat, plaquette_key, postselect_all, vertex_key, GEntangler, NgEntangler,
};
use crate::protocols::{entangle_nil2, merge_nil2_edges, nil2_input};
use crate::register::{Ket, LocalOperator, Part, QuditRegister, Site, SiteKey};
use crate::sparse::SparseKet;

/// Deviations at or below this pass.
pub const IDENTITY_TOL: f64 = 1e-10;

pub const IDENTITY_IDS: &[&str] = &[
    "kw_gate_form",
    "symmetry_kernel",
    "dual_loop",
    "vertex_gauging",
    "two_step",
    "residual_symmetry",
    "dressed_loop",
    "edge_simplification",
    "conj_cl_cr",
    "conj_z",
    "conj_u_ng_l",
    "conj_u_ng_ztilde",
    "nil2_two_forms",
    "ddw_push_through",
    "irrep_sum_rule",
];

/// Identities that do not depend on the graph.
const LOCAL_IDS: &[&str] =
    &["edge_simplification", "conj_cl_cr", "conj_z", "conj_u_ng_l", "conj_u_ng_ztilde", "irrep_sum_rule"];

#[derive(Clone, Debug, Serialize)]
pub struct IdentityRow {
    pub id: String,
    pub group: String,
    pub graph: String,
    /// Infinite when both sides vanish identically.
    pub deviation: f64,
}

impl IdentityRow {
    pub fn passed(&self) -> bool {
        self.deviation <= IDENTITY_TOL
    }
}

type Map<'a> = dyn Fn(&mut SparseKet) -> Result<()> + Sync + 'a;

/// Largest column difference of two maps over every basis input on `sites`.
/// Returns infinity if every column of both maps vanishes.
fn compare_maps(sites: &[Site], lhs: &Map<'_>, rhs: &Map<'_>) -> Result<f64> {
    let dims: Vec<usize> = sites.iter().map(Site::dim).collect();
    let total: usize = dims.iter().product();
    let cols: Vec<(f64, f64)> = (0..total)
        .into_par_iter()
        .map(|j| {
            let x = SparseKet::basis(sites.to_vec(), digits(j, &dims))?;
            let (mut a, mut b) = (x.clone(), x);
            lhs(&mut a)?;
            rhs(&mut b)?;
            Ok((a.max_difference(&b)?, a.max_abs().max(b.max_abs())))
        })
        .collect::<Result<_>>()?;
    let dev = cols.iter().map(|c| c.0).fold(0.0, f64::max);
    let scale = cols.iter().map(|c| c.1).fold(0.0, f64::max);
    Ok(if scale < 1e-12 { f64::INFINITY } else { dev })
}

/// Largest difference between two local operators.
fn op_deviation(a: &LocalOperator, b: &LocalOperator) -> f64 {
    a.max_deviation(b)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn vertex_sites(cell: &Cellulation, group: &Arc<FiniteGroup>, round: u8) -> Vec<Site> {
    (0..cell.num_vertices()).map(|v| Site { key: vertex_key(v, round), group: group.clone() }).collect()
}

fn vertex_keys(cell: &Cellulation, round: u8) -> Vec<SiteKey> {
    (0..cell.num_vertices()).map(|v| vertex_key(v, round)).collect()
}

fn n_keys(cell: &Cellulation, round: u8) -> Vec<SiteKey> {
    (0..cell.num_vertices()).map(|v| vertex_key(v, round).with_part(Part::Normal)).collect()
}

/// The definitional map `⊗_v|g_v⟩ ↦ ⊗_e|ḡ_{i_e} g_{f_e}⟩` on the vertices of
/// `round`, other sites being spectators.
pub fn kw_definitional(k: &mut SparseKet, cell: &Cellulation, group: &Arc<FiniteGroup>, round: u8) -> Result<()> {
    let vpos: Vec<usize> = (0..cell.num_vertices()).map(|v| k.position(vertex_key(v, round))).collect::<Result<_>>()?;
    for &p in &vpos {
        if k.sites()[p].dim() != group.order() {
            return Err(Error::LayoutMismatch(format!(
                "vertex site {} does not carry {}",
                k.sites()[p].key,
                group.name()
            )));
        }
    }
    let keep: Vec<usize> = (0..k.sites().len()).filter(|p| !vpos.contains(p)).collect();
    let mut sites: Vec<Site> = keep.iter().map(|&p| k.sites()[p].clone()).collect();
    sites.extend((0..cell.num_edges()).map(|e| Site { key: edge_key(e, round), group: group.clone() }));
    let mut terms: HashMap<Vec<usize>, Complex64> = HashMap::new();
    for (l, &a) in k.terms() {
        let mut out: Vec<usize> = keep.iter().map(|&p| l[p]).collect();
        out.extend(cell.edges().iter().map(|&(i, f)| group.ldiv(l[vpos[i]], l[vpos[f]])));
        *terms.entry(out).or_default() += a;
    }
    *k = SparseKet::from_terms(sites, terms)?;
    Ok(())
}

/// Gate form `⟨+|_V U^G |1⟩_E`, rescaled by `|G|^{|V|/2}` so that it equals
/// the definitional map.
fn kw_gate(k: &mut SparseKet, cell: &Cellulation, u: &GEntangler, round: u8) -> Result<()> {
    u.apply(k, cell, round)?;
    postselect_all(k, vertex_keys(cell, round))?;
    k.scale(real((u.group().order() as f64).powf(cell.num_vertices() as f64 / 2.0)));
    Ok(())
}

/// Gate form of the partial map for `N ◁ G`, rescaled by `|N|^{|V|/2}`.
fn kw_n_gate(k: &mut SparseKet, cell: &Cellulation, u: &NgEntangler<'_>, round: u8) -> Result<()> {
    u.apply(k, cell, round)?;
    postselect_all(k, n_keys(cell, round))?;
    k.scale(real((u.factor_system().n_group().order() as f64).powf(cell.num_vertices() as f64 / 2.0)));
    Ok(())
}

fn apply_all(k: &mut SparseKet, op: &LocalOperator, keys: &[SiteKey]) -> Result<()> {
    for &key in keys {
        k.apply(op, &[key])?;
    }
    Ok(())
}

/// Proper nontrivial normal subgroups with their factor systems.
fn normal_factor_systems(g: &Arc<FiniteGroup>) -> Result<Vec<FactorSystem>> {
    normal_subgroups(g).iter().filter(|n| !n.is_trivial() && !n.is_whole()).map(|n| factor_system_of(g, n)).collect()
}

fn fs_label(fs: &FactorSystem) -> String {
    format!("{}[N={}]", fs.parent().name(), fs.n_group().order())
}

/// The central extension used by the one-shot route, when there is one.
fn nil2_system(g: &Arc<FiniteGroup>) -> Result<Option<FactorSystem>> {
    let fs = factor_system_of(g, &center(g))?;
    Ok((is_nil2_extension(&fs) && fs.n_group().is_abelian()).then_some(fs))
}

/// Diagonal loop operator `tr Π_k ρ(x_k)^{O_k}` where `x_k` is computed from
/// the labels of `keys` by `value(step, labels)`.
fn trace_loop(
    dims: Vec<usize>,
    irrep: &crate::groups::Irrep,
    steps: usize,
    element: impl Fn(usize, &[usize]) -> usize,
) -> LocalOperator {
    let total: usize = dims.iter().product();
    let phase = (0..total)
        .map(|j| {
            let x = digits(j, &dims);
            let mut m = nalgebra::DMatrix::<Complex64>::identity(irrep.dim(), irrep.dim());
            for s in 0..steps {
                m *= irrep.matrix(element(s, &x));
            }
            m.trace()
        })
        .collect();
    LocalOperator::diagonal(dims, phase)
}

struct Ctx<'a> {
    group: &'a Arc<FiniteGroup>,
    cell: &'a Cellulation,
    irreps: Option<&'a IrrepTable>,
    normals: &'a [FactorSystem],
    normal_irreps: &'a [Option<IrrepTable>],
}

impl Ctx<'_> {
    fn row(&self, id: &str, group: String, local: bool, deviation: f64) -> IdentityRow {
        let graph = if local { "local".to_string() } else { self.cell.name().to_string() };
        IdentityRow { id: id.into(), group, graph, deviation }
    }

    fn run(&self, id: &str) -> Result<Vec<IdentityRow>> {
        let (g, cell) = (self.group, self.cell);
        let name = g.name().to_string();
        let local = LOCAL_IDS.contains(&id);
        let one = |dev: f64| Ok(vec![self.row(id, name.clone(), local, dev)]);
        let ug = GEntangler::new(g);
        match id {
            "kw_gate_form" => one(compare_maps(&vertex_sites(cell, g, 0), &|k| kw_gate(k, cell, &ug, 0), &|k| {
                kw_definitional(k, cell, g, 0)
            })?),
            "symmetry_kernel" => {
                let mut worst: f64 = 0.0;
                for x in g.elements() {
                    let l = gates::left_mult(g, x);
                    let vk = vertex_keys(cell, 0);
                    worst = worst.max(compare_maps(
                        &vertex_sites(cell, g, 0),
                        &|k| {
                            apply_all(k, &l, &vk)?;
                            kw_gate(k, cell, &ug, 0)
                        },
                        &|k| kw_gate(k, cell, &ug, 0),
                    )?);
                }
                one(worst)
            }
            "dual_loop" => {
                let (Some(table), walks) = (self.irreps, loops(cell)?) else { return Ok(vec![]) };
                if walks.is_empty() {
                    return Ok(vec![]);
                }
                let mut worst: f64 = 0.0;
                for irrep in table.irreps() {
                    for walk in &walks {
                        let (op, edges) = gates::loop_z(irrep, g, cell, walk)?;
                        let keys: Vec<SiteKey> = edges.iter().map(|&e| edge_key(e, 0)).collect();
                        let d = irrep.dim() as f64;
                        worst = worst.max(compare_maps(
                            &vertex_sites(cell, g, 0),
                            &|k| {
                                kw_gate(k, cell, &ug, 0)?;
                                k.apply(&op, &keys)
                            },
                            &|k| {
                                kw_gate(k, cell, &ug, 0)?;
                                k.scale(real(d));
                                Ok(())
                            },
                        )?);
                    }
                }
                one(worst)
            }
            "vertex_gauging" => {
                let mut worst: f64 = 0.0;
                for v in 0..cell.num_vertices() {
                    for x in g.elements() {
                        let r = gates::right_mult(g, x);
                        let (a, keys) = vertex_term(g, cell, v, x);
                        let keys: Vec<SiteKey> = keys.iter().map(|k| edge_key(k.index, 0)).collect();
                        worst = worst.max(compare_maps(
                            &vertex_sites(cell, g, 0),
                            &|k| {
                                k.apply(&r, &[vertex_key(v, 0)])?;
                                kw_gate(k, cell, &ug, 0)
                            },
                            &|k| {
                                kw_gate(k, cell, &ug, 0)?;
                                k.apply(&a, &keys)
                            },
                        )?);
                    }
                }
                one(worst)
            }
            "two_step" => {
                let mut rows = Vec::new();
                for fs in self.normals {
                    let un = NgEntangler::new(fs);
                    let q = fs.q_group();
                    let lhs = |k: &mut SparseKet| -> Result<()> {
                        kw_n_gate(k, cell, &un, 0)?;
                        if q.is_abelian() {
                            entangle_abelian(k, cell, q, 1)?;
                            postselect_all(k, vertex_keys(cell, 1))?;
                            k.scale(real((q.order() as f64).powf(cell.num_vertices() as f64 / 2.0)));
                        } else {
                            kw_definitional(k, cell, q, 1)?;
                        }
                        for e in 0..cell.num_edges() {
                            k.merge_sites(edge_key(e, 0), edge_key(e, 1), edge_key(e, 0), g.clone(), |n, q| {
                                fs.element(n, q)
                            })?;
                        }
                        Ok(())
                    };
                    let dev = compare_maps(&vertex_sites(cell, g, 0), &lhs, &|k| kw_definitional(k, cell, g, 0))?;
                    rows.push(self.row(id, fs_label(fs), local, dev));
                }
                Ok(rows)
            }
            "residual_symmetry" => {
                let mut rows = Vec::new();
                for fs in self.normals {
                    let un = NgEntangler::new(fs);
                    let mut worst: f64 = 0.0;
                    for x in g.elements() {
                        let l = gates::left_mult(g, x);
                        let lq = gates::left_mult(fs.q_group(), fs.proj(x));
                        worst = worst.max(compare_maps(
                            &vertex_sites(cell, g, 0),
                            &|k| {
                                apply_all(k, &l, &vertex_keys(cell, 0))?;
                                kw_n_gate(k, cell, &un, 0)
                            },
                            &|k| {
                                kw_n_gate(k, cell, &un, 0)?;
                                apply_all(k, &lq, &vertex_keys(cell, 1))
                            },
                        )?);
                    }
                    rows.push(self.row(id, fs_label(fs), local, worst));
                }
                Ok(rows)
            }
            "dressed_loop" => {
                let walks = loops(cell)?;
                if walks.is_empty() {
                    return Ok(vec![]);
                }
                let mut rows = Vec::new();
                for (fs, table) in self.normals.iter().zip(self.normal_irreps) {
                    let Some(table) = table else { continue };
                    let un = NgEntangler::new(fs);
                    let mut worst: f64 = 0.0;
                    for irrep in table.irreps() {
                        for walk in &walks {
                            let (op, keys) = dressed_loop_op(fs, cell, irrep, walk);
                            let d = irrep.dim() as f64;
                            worst = worst.max(compare_maps(
                                &vertex_sites(cell, g, 0),
                                &|k| {
                                    kw_n_gate(k, cell, &un, 0)?;
                                    k.apply(&op, &keys)
                                },
                                &|k| {
                                    kw_n_gate(k, cell, &un, 0)?;
                                    k.scale(real(d));
                                    Ok(())
                                },
                            )?);
                        }
                    }
                    rows.push(self.row(id, fs_label(fs), local, worst));
                }
                Ok(rows)
            }
            "edge_simplification" => {
                Ok(self.normals.iter().map(|fs| self.row(id, fs_label(fs), local, edge_simplification(fs))).collect())
            }
            "conj_cl_cr" => one(conj_cl_cr(g)),
            "conj_z" => match self.irreps {
                Some(t) => one(conj_z(g, t)),
                None => Ok(vec![]),
            },
            "conj_u_ng_l" => {
                Ok(self.normals.iter().map(|fs| self.row(id, fs_label(fs), local, conj_u_ng_l(fs))).collect())
            }
            "conj_u_ng_ztilde" => Ok(self
                .normals
                .iter()
                .zip(self.normal_irreps)
                .filter_map(|(fs, t)| t.as_ref().map(|t| self.row(id, fs_label(fs), local, conj_u_ng_ztilde(fs, t))))
                .collect()),
            "nil2_two_forms" => {
                let Some(fs) = nil2_system(g)? else { return Ok(vec![]) };
                let mut reg = nil2_input(&fs, cell)?;
                entangle_nil2(&mut reg, &fs, cell)?;
                postselect_all(&mut reg, vertex_keys(cell, 0))?;
                postselect_all(&mut reg, (0..cell.num_plaquettes()).map(|p| plaquette_key(p, 0)))?;
                merge_nil2_edges(&mut reg, &fs, cell)?;
                reg.normalize();
                one(state_deviation(&reg, &oracle_double_state(g, cell)?)?)
            }
            "ddw_push_through" => {
                if !cell.is_surface() {
                    return Ok(vec![]);
                }
                let Some(fs) = nil2_system(g)? else { return Ok(vec![]) };
                one(ddw_push_through(&fs, cell)?)
            }
            "irrep_sum_rule" => match self.irreps {
                Some(t) => one(irrep_sum_rule(g, t)),
                None => Ok(vec![]),
            },
            other => Err(Error::Unsupported(format!("unknown identity '{other}'"))),
        }
    }
}

/// `tr Π_e ρ^ν(ñ_e)^{O_e}` with `ñ_e = σ^{q_i}[n_e] ω(q_i, q̄_i q_f)`, on the loop
/// edges followed by the quotient parts of the loop vertices.
fn dressed_loop_op(
    fs: &FactorSystem,
    cell: &Cellulation,
    irrep: &crate::groups::Irrep,
    walk: &[(usize, Orientation)],
) -> (LocalOperator, Vec<SiteKey>) {
    let (n, q) = (fs.n_group(), fs.q_group());
    let (edges, slots) = walk_slots(walk);
    let mut verts: Vec<usize> = edges.iter().flat_map(|&e| [cell.edge(e).0, cell.edge(e).1]).collect();
    verts.sort_unstable();
    verts.dedup();
    let ne = edges.len();
    let mut dims = vec![n.order(); ne];
    dims.extend(std::iter::repeat(q.order()).take(verts.len()));
    let vslot = |v: usize| ne + verts.binary_search(&v).unwrap();
    let op = trace_loop(dims, irrep, walk.len(), |s, x| {
        let (e, o) = walk[s];
        let (i, f) = cell.edge(e);
        let (qi, qf) = (x[vslot(i)], x[vslot(f)]);
        let tilde = n.mul(fs.sigma(qi, x[slots[s]]), fs.omega(qi, q.ldiv(qi, qf)));
        if o == 1 {
            tilde
        } else {
            n.inv(tilde)
        }
    });
    let mut keys: Vec<SiteKey> = edges.iter().map(|&e| edge_key(e, 0)).collect();
    keys.extend(verts.iter().map(|&v| vertex_key(v, 1)));
    (op, keys)
}

/// Number of `(g_i, g_f)` where the dressed edge label differs from `n̄_i n_f`.
fn edge_simplification(fs: &FactorSystem) -> f64 {
    let (g, n, q) = (fs.parent(), fs.n_group(), fs.q_group());
    let mut bad = 0usize;
    for gi in g.elements() {
        for gf in g.elements() {
            let (ni, qi, nf, qf) = (fs.tpart(gi), fs.proj(gi), fs.tpart(gf), fs.proj(gf));
            let qib = q.inv(qi);
            let ne = n.mul(n.mul(n.inv(fs.omega(qib, qi)), fs.sigma(qib, n.mul(n.inv(ni), nf))), fs.omega(qib, qf));
            if ne != fs.tpart(g.ldiv(gi, gf)) {
                bad += 1;
                continue;
            }
            let tilde = n.mul(fs.sigma(qi, ne), fs.omega(qi, q.ldiv(qi, qf)));
            if tilde != n.mul(n.inv(ni), nf) {
                bad += 1;
            }
        }
    }
    bad as f64
}

fn conj_cl_cr(g: &FiniteGroup) -> f64 {
    let d = g.order();
    let id = LocalOperator::identity(vec![d]);
    let (cl, cr) = (gates::controlled_left(g), gates::controlled_right(g));
    let conj = |u: &LocalOperator, x: &LocalOperator| u.adjoint().compose(x).compose(u);
    let mut worst: f64 = 0.0;
    for x in g.elements() {
        let (l, r) = (gates::left_mult(g, x), gates::right_mult(g, x));
        worst = worst
            .max(op_deviation(&conj(&cl, &l.tensor(&l)), &l.tensor(&id)))
            .max(op_deviation(&conj(&cr, &l.tensor(&r)), &l.tensor(&id)))
            .max(op_deviation(&conj(&cl, &r.tensor(&id)), &r.tensor(&l)))
            .max(op_deviation(&conj(&cr, &r.tensor(&id)), &r.tensor(&r)));
    }
    worst
}

/// `CL (Z^μ_v Z^μ_e) CL† = Z^μ_e` and `CR (Z^μ_e Z^μ̄_v) CR† = Z^μ_e` entry by
/// entry in the open bond indices, where `ρ^μ̄(g) = ρ^μ(ḡ)`.
fn conj_z(g: &FiniteGroup, table: &IrrepTable) -> f64 {
    let d = g.order();
    let (cl, cr) = (gates::controlled_left(g), gates::controlled_right(g));
    let diag = |f: &dyn Fn(usize, usize) -> Complex64| {
        LocalOperator::diagonal(vec![d, d], (0..d * d).map(|j| f(j / d, j % d)).collect())
    };
    let mut worst: f64 = 0.0;
    for irrep in table.irreps() {
        for a in 0..irrep.dim() {
            for b in 0..irrep.dim() {
                let bare = diag(&|_, h| irrep.entry(h, a, b));
                let left = diag(&|gv, h| (irrep.matrix(gv) * irrep.matrix(h))[(a, b)]);
                let right = diag(&|gv, h| (irrep.matrix(h) * irrep.matrix(g.inv(gv)))[(a, b)]);
                worst = worst
                    .max(op_deviation(&cl.compose(&left).compose(&cl.adjoint()), &bare))
                    .max(op_deviation(&cr.compose(&right).compose(&cr.adjoint()), &bare));
            }
        }
    }
    worst
}

/// `U† (L^g ⊗ 1 ⊗ L^g) U = L^g ⊗ L^n R^n Σ^q ⊗ L^g` for every `g = (n, q)`,
/// with `U` the edge factor on `(ℂ[G], ℂ[N], ℂ[G])`.
fn conj_u_ng_l(fs: &FactorSystem) -> f64 {
    let (g, n) = (fs.parent(), fs.n_group());
    let u = gates::u_ng_edge_factor(fs);
    let idn = LocalOperator::identity(vec![n.order()]);
    let mut worst: f64 = 0.0;
    for x in g.elements() {
        let l = gates::left_mult(g, x);
        let (nx, qx) = (fs.tpart(x), fs.proj(x));
        let mid = LocalOperator::permutation(
            vec![n.order()],
            n.elements().map(|m| n.mul(n.mul(nx, fs.sigma(qx, m)), n.inv(nx))).collect(),
        );
        let lhs = u.adjoint().compose(&l.tensor(&idn).tensor(&l)).compose(&u);
        worst = worst.max(op_deviation(&lhs, &l.tensor(&mid).tensor(&l)));
    }
    worst
}

/// `U† Z̃^ν_e U = Z^ν̄_{i_e} Z^ν_e Z^ν_{f_e}` entry by entry, the vertex factors
/// reading the `N` part `t(g)`.
fn conj_u_ng_ztilde(fs: &FactorSystem, table: &IrrepTable) -> f64 {
    let (g, n, q) = (fs.parent(), fs.n_group(), fs.q_group());
    let u = gates::u_ng_edge_factor(fs);
    let dims = vec![g.order(), n.order(), g.order()];
    let total = g.order() * n.order() * g.order();
    let mut worst: f64 = 0.0;
    for irrep in table.irreps() {
        for a in 0..irrep.dim() {
            for b in 0..irrep.dim() {
                let tilde = LocalOperator::diagonal(
                    dims.clone(),
                    (0..total)
                        .map(|j| {
                            let x = digits(j, &dims);
                            let (qi, qf) = (fs.proj(x[0]), fs.proj(x[2]));
                            irrep.entry(n.mul(fs.sigma(qi, x[1]), fs.omega(qi, q.ldiv(qi, qf))), a, b)
                        })
                        .collect(),
                );
                let bare = LocalOperator::diagonal(
                    dims.clone(),
                    (0..total)
                        .map(|j| {
                            let x = digits(j, &dims);
                            let m =
                                irrep.matrix(n.inv(fs.tpart(x[0]))) * irrep.matrix(x[1]) * irrep.matrix(fs.tpart(x[2]));
                            m[(a, b)]
                        })
                        .collect(),
                );
                worst = worst.max(op_deviation(&u.adjoint().compose(&tilde).compose(&u), &bare));
            }
        }
    }
    worst
}

/// `Ω_VEV · KŴ^N = KŴ^N · Ω_VVPP` as maps from `(ℂ[Q]^V, ℂ[N]^P)`.
fn ddw_push_through(fs: &FactorSystem, cell: &Cellulation) -> Result<f64> {
    let (n, q) = (fs.n_group(), fs.q_group());
    let chi = n.require_pairing()?;
    let mut sites: Vec<Site> =
        (0..cell.num_vertices()).map(|v| Site { key: vertex_key(v, 0), group: q.clone() }).collect();
    sites.extend((0..cell.num_plaquettes()).map(|p| Site { key: plaquette_key(p, 0), group: n.clone() }));
    let pkeys: Vec<SiteKey> = (0..cell.num_plaquettes()).map(|p| plaquette_key(p, 0)).collect();
    let omega = gates::omega_gate(fs);
    let (nq, nn) = (q.order(), n.order());
    let vvpp = LocalOperator::diagonal(
        vec![nq, nq, nn, nn],
        (0..nq * nq * nn * nn)
            .map(|j| {
                let x = digits(j, &[nq, nq, nn, nn]);
                let w = fs.omega(x[0], q.ldiv(x[0], x[1]));
                chi.chi(n.inv(w), n.ldiv(x[2], x[3]))
            })
            .collect(),
    );
    let lhs = |k: &mut SparseKet| -> Result<()> {
        entangle_hat(k, cell, n, 0)?;
        postselect_all(k, pkeys.clone())?;
        for (e, &(i, f)) in cell.edges().iter().enumerate() {
            k.apply(&omega, &[vertex_key(i, 0), edge_key(e, 0), vertex_key(f, 0)])?;
        }
        Ok(())
    };
    let rhs = |k: &mut SparseKet| -> Result<()> {
        for (e, &(i, f)) in cell.edges().iter().enumerate() {
            let (pi, pf) = cell.dual_edge(e);
            // a dual self-loop carries no domain wall
            if pi != pf {
                k.apply(&vvpp, &[vertex_key(i, 0), vertex_key(f, 0), plaquette_key(pi, 0), plaquette_key(pf, 0)])?;
            }
        }
        entangle_hat(k, cell, n, 0)?;
        postselect_all(k, pkeys.clone())
    };
    compare_maps(&sites, &lhs, &rhs)
}

fn irrep_sum_rule(g: &FiniteGroup, table: &IrrepTable) -> f64 {
    let order = g.order() as f64;
    let mut worst: f64 = 0.0;
    for x in g.elements() {
        let s: Complex64 = table.irreps().iter().map(|r| r.character(x) * r.dim() as f64).sum::<Complex64>() / order;
        let want = if x == g.identity() { ONE } else { Complex64::new(0.0, 0.0) };
        worst = worst.max((s - want).norm());
    }
    let squares: usize = table.irreps().iter().map(|r| r.dim() * r.dim()).sum();
    worst.max((squares as f64 - order).abs())
}

/// Largest entry difference after fixing the relative global phase.
pub fn state_deviation(a: &QuditRegister, b: &QuditRegister) -> Result<f64> {
    let mut b = b.clone();
    b.reorder(&a.keys())?;
    let ip = b.inner_product(a)?;
    let phase = if ip.norm() > 1e-300 { ip / ip.norm() } else { ONE };
    Ok(a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - phase * y).norm()).fold(0.0, f64::max))
}

/// Runs one identity for one group on one graph. Identities that do not
/// apply (no irrep data, no loops, no suitable extension) return no rows.
pub fn check_identity(id: &str, group: &Arc<FiniteGroup>, cell: &Cellulation) -> Result<Vec<IdentityRow>> {
    let irreps = irrep_table(group).ok();
    let normals = normal_factor_systems(group)?;
    let normal_irreps: Vec<Option<IrrepTable>> = normals.iter().map(|fs| irrep_table(fs.n_group()).ok()).collect();
    Ctx { group, cell, irreps: irreps.as_ref(), normals: &normals, normal_irreps: &normal_irreps }.run(id)
}

/// Every identity for every group on every graph, in a fixed order. Local
/// identities run once per group.
pub fn run_identity_suite(groups: &[Arc<FiniteGroup>], cells: &[Cellulation]) -> Result<Vec<IdentityRow>> {
    let mut tasks = Vec::new();
    for g in groups {
        for &id in IDENTITY_IDS {
            if LOCAL_IDS.contains(&id) {
                if let Some(c) = cells.first() {
                    tasks.push((id, g, c));
                }
            } else {
                tasks.extend(cells.iter().map(|c| (id, g, c)));
            }
        }
    }
    let rows: Vec<Vec<IdentityRow>> =
        tasks.par_iter().map(|&(id, g, c)| check_identity(id, g, c)).collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::catalog;

    #[test]
    fn s3_identities_on_two_vertices() {
        let s3 = catalog::by_name("S3").unwrap().group;
        let rows = run_identity_suite(&[s3], &[Cellulation::single_edge()]).unwrap();
        for r in &rows {
            assert!(r.passed(), "{r:?}");
        }
        assert!(rows.iter().any(|r| r.id == "two_step"));
    }

    #[test]
    fn unknown_identity_is_rejected() {
        let z2 = catalog::by_name("Z2").unwrap().group;
        assert!(check_identity("nope", &z2, &Cellulation::single_edge()).is_err());
    }
}
