//! Kramers-Wannier maps, exact and measured.
//!
//! Site naming: a map run at round `r` reads vertex sites
//! `SiteKey::vertex(v).at_round(r)` (or plaquette sites for the dual map) and
//! writes edge sites `SiteKey::edge(e).at_round(r)`. The partial map for
//! `N ◁ G` leaves the quotient parts behind as `vertex(v).at_round(r + 1)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cellulation::Cellulation;
use crate::error::{Error, Result};
use crate::feedforward::{charge_correction, flux_correction, CorrectionBasis, CorrectionPlan, SyndromeSet};
use crate::gates;
use crate::groups::{FactorSystem, FiniteGroup};
use crate::register::{Choice, Init, Ket, LocalOperator, Part, QuditRegister, Site, SiteKey};

/// Symmetry deviations above this are rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// How measurements are resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KwMode {
    /// Contract every measured site with `⟨+|`.
    PostselectPlus,
    /// Born-rule sampling from a seeded ChaCha8 stream.
    Sample(u64),
    /// Outcomes per site; absent sites take the trivial outcome.
    Forced(BTreeMap<SiteKey, usize>),
}

impl KwMode {
    pub fn is_postselect(&self) -> bool {
        matches!(self, KwMode::PostselectPlus)
    }
}

/// One resolved single-site measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub site: SiteKey,
    pub outcome: usize,
    /// Born probability; absent when postselected.
    pub probability: Option<f64>,
}

/// Resolves measurements according to a mode; owns the random stream so a
/// multi-round protocol is reproducible from its seed alone.
pub struct Measurer {
    mode: KwMode,
    rng: ChaCha8Rng,
}

impl Measurer {
    pub fn new(mode: &KwMode) -> Self {
        let seed = if let KwMode::Sample(s) = mode { *s } else { 0 };
        Self { mode: mode.clone(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn is_postselect(&self) -> bool {
        self.mode.is_postselect()
    }

    pub fn mode(&self) -> &KwMode {
        &self.mode
    }

    pub fn measure(&mut self, reg: &mut QuditRegister, key: SiteKey) -> Result<OutcomeRecord> {
        match &self.mode {
            KwMode::PostselectPlus => {
                reg.project_plus(key)?;
                Ok(OutcomeRecord { site: key, outcome: 0, probability: None })
            }
            KwMode::Sample(_) => {
                let m = reg.measure_fourier(key, Choice::Sample(&mut self.rng))?;
                Ok(OutcomeRecord { site: key, outcome: m.outcome, probability: Some(m.probability) })
            }
            KwMode::Forced(table) => {
                let a = table.get(&key).copied().unwrap_or(0);
                let m = reg.measure_fourier(key, Choice::Forced(a))?;
                Ok(OutcomeRecord { site: key, outcome: m.outcome, probability: Some(m.probability) })
            }
        }
    }
}

/// Output of one KW map.
#[derive(Clone, Debug)]
pub struct KwResult {
    pub register: QuditRegister,
    pub outcomes: Vec<OutcomeRecord>,
    pub corrections: Vec<CorrectionPlan>,
    /// Norm of the state before final renormalization.
    pub norm: f64,
    /// The normalized state between measurement and correction, in measured modes.
    pub pre_correction: Option<QuditRegister>,
}

pub fn vertex_key(v: usize, round: u8) -> SiteKey {
    SiteKey::vertex(v).at_round(round)
}

pub fn edge_key(e: usize, round: u8) -> SiteKey {
    SiteKey::edge(e).at_round(round)
}

pub fn plaquette_key(p: usize, round: u8) -> SiteKey {
    SiteKey::plaquette(p).at_round(round)
}

/// Largest relative deviation `‖Π_k L^g_k ψ − ψ‖ / ‖ψ‖` over `g`, with the
/// worst element.
pub fn symmetry_deviation(reg: &QuditRegister, keys: &[SiteKey], group: &FiniteGroup) -> Result<(usize, f64)> {
    let norm = reg.norm_sqr().sqrt();
    let mut worst = (0, 0.0);
    for g in group.elements().skip(1) {
        let op = gates::left_mult(group, g);
        let mut moved = reg.clone();
        for &k in keys {
            moved.apply(&op, &[k])?;
        }
        let diff: f64 =
            moved.amplitudes().iter().zip(reg.amplitudes()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let dev = if norm > 0.0 { diff / norm } else { diff };
        if dev > worst.1 {
            worst = (g, dev);
        }
    }
    Ok(worst)
}

fn require_symmetric(reg: &QuditRegister, keys: &[SiteKey], group: &FiniteGroup) -> Result<()> {
    let (element, deviation) = symmetry_deviation(reg, keys, group)?;
    if deviation > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { element, deviation });
    }
    Ok(())
}

fn check_site_groups(reg: &QuditRegister, keys: &[SiteKey], group: &FiniteGroup) -> Result<()> {
    for &k in keys {
        let g = reg.group_of(k)?;
        if **g != *group {
            return Err(Error::Register(format!("site {k} carries {} but the map expects {}", g.name(), group.name())));
        }
    }
    Ok(())
}

/// Applies a correction plan to the edges written at `round`.
pub fn apply_plan(
    reg: &mut QuditRegister,
    plan: &CorrectionPlan,
    group: &FiniteGroup,
    cell: &Cellulation,
    round: u8,
    fs: Option<&FactorSystem>,
) -> Result<()> {
    apply_plan_on(reg, plan, group, cell, |e| edge_key(e, round), |v| vertex_key(v, round + 1), fs)
}

/// As [`apply_plan`] with explicit edge keys and, for dressed plans, the
/// keys of the vertex quotient parts.
pub fn apply_plan_on(
    reg: &mut QuditRegister,
    plan: &CorrectionPlan,
    group: &FiniteGroup,
    cell: &Cellulation,
    edge: impl Fn(usize) -> SiteKey,
    qpart: impl Fn(usize) -> SiteKey,
    fs: Option<&FactorSystem>,
) -> Result<()> {
    for &(e, k) in &plan.exponents {
        match plan.basis {
            CorrectionBasis::Z => reg.apply(&gates::z_character(group, k)?, &[edge(e)])?,
            CorrectionBasis::X => reg.apply(&gates::right_shift(group, k), &[edge(e)])?,
            CorrectionBasis::DressedZ => {
                let fs = fs.ok_or_else(|| Error::Unsupported("dressed correction without factor system".into()))?;
                let (i, f) = cell.edge(e);
                reg.apply(&gates::dressed_z(fs, k)?, &[qpart(i), edge(e), qpart(f)])?;
            }
        }
    }
    Ok(())
}

fn finish(
    mut register: QuditRegister,
    outcomes: Vec<OutcomeRecord>,
    corrections: Vec<CorrectionPlan>,
    pre_correction: Option<QuditRegister>,
) -> KwResult {
    let norm = register.normalize();
    KwResult { register, outcomes, corrections, norm, pre_correction }
}

/// Gauges an `A`-symmetric vertex state: edge ancillas in `|1⟩`, then
/// `CX†_{i_e e} CX_{f_e e}` per edge, then a Fourier measurement of every
/// vertex and a `Z`-string repair.
pub fn kw_abelian(
    mut reg: QuditRegister,
    cell: &Cellulation,
    group: &Arc<FiniteGroup>,
    round: u8,
    measurer: &mut Measurer,
) -> Result<KwResult> {
    group.require_pairing()?;
    let vkeys: Vec<SiteKey> = (0..cell.num_vertices()).map(|v| vertex_key(v, round)).collect();
    check_site_groups(&reg, &vkeys, group)?;
    require_symmetric(&reg, &vkeys, group)?;
    entangle_abelian(&mut reg, cell, group, round)?;
    let mut outcomes = Vec::with_capacity(vkeys.len());
    for &k in &vkeys {
        outcomes.push(measurer.measure(&mut reg, k)?);
    }
    let mut corrections = Vec::new();
    let pre = (!measurer.is_postselect()).then(|| reg.clone());
    if !measurer.is_postselect() {
        let labels = outcomes.iter().map(|o| o.outcome).collect();
        let plan = charge_correction(&SyndromeSet::charges(group.clone(), labels), cell, &cell.spanning_tree()?)?;
        apply_plan(&mut reg, &plan, group, cell, round, None)?;
        corrections.push(plan);
    }
    Ok(finish(reg, outcomes, corrections, pre))
}

/// Gauges an `A`-symmetric plaquette state: edge ancillas in `|+⟩`, then
/// `CZ_{i_ě e} CZ†_{f_ě e}` per edge, then a Fourier measurement of every
/// plaquette and an `X`-string repair along the dual tree.
pub fn kw_hat_abelian(
    mut reg: QuditRegister,
    cell: &Cellulation,
    group: &Arc<FiniteGroup>,
    round: u8,
    measurer: &mut Measurer,
) -> Result<KwResult> {
    group.require_pairing()?;
    if !cell.is_surface() {
        return Err(Error::Unsupported("dual map needs plaquettes".into()));
    }
    let pkeys: Vec<SiteKey> = (0..cell.num_plaquettes()).map(|p| plaquette_key(p, round)).collect();
    check_site_groups(&reg, &pkeys, group)?;
    require_symmetric(&reg, &pkeys, group)?;
    entangle_hat(&mut reg, cell, group, round)?;
    let mut outcomes = Vec::with_capacity(pkeys.len());
    for &k in &pkeys {
        outcomes.push(measurer.measure(&mut reg, k)?);
    }
    let mut corrections = Vec::new();
    let pre = (!measurer.is_postselect()).then(|| reg.clone());
    if !measurer.is_postselect() {
        let labels = outcomes.iter().map(|o| o.outcome).collect();
        let plan = flux_correction(&SyndromeSet::fluxes(group.clone(), labels), cell, &cell.dual_spanning_tree()?)?;
        apply_plan(&mut reg, &plan, group, cell, round, None)?;
        corrections.push(plan);
    }
    Ok(finish(reg, outcomes, corrections, pre))
}

/// Edge ancillas in `|1⟩` and `CX†_{i_e e} CX_{f_e e}` per edge.
pub fn entangle_abelian<K: Ket>(k: &mut K, cell: &Cellulation, group: &Arc<FiniteGroup>, round: u8) -> Result<()> {
    for e in 0..cell.num_edges() {
        k.add_site(edge_key(e, round), group.clone(), Init::Identity)?;
    }
    let cx = gates::cx_abelian(group)?;
    let cxd = cx.adjoint();
    for (e, &(i, f)) in cell.edges().iter().enumerate() {
        k.apply(&cxd, &[vertex_key(i, round), edge_key(e, round)])?;
        k.apply(&cx, &[vertex_key(f, round), edge_key(e, round)])?;
    }
    Ok(())
}

/// Edge ancillas in `|+⟩` and `CZ_{i_ě e} CZ†_{f_ě e}` per edge.
pub fn entangle_hat<K: Ket>(k: &mut K, cell: &Cellulation, group: &Arc<FiniteGroup>, round: u8) -> Result<()> {
    for e in 0..cell.num_edges() {
        k.add_site(edge_key(e, round), group.clone(), Init::Plus)?;
    }
    let cz = gates::cz_abelian(group)?;
    let czd = cz.adjoint();
    for e in 0..cell.num_edges() {
        let (pi, pf) = cell.dual_edge(e);
        k.apply(&cz, &[plaquette_key(pi, round), edge_key(e, round)])?;
        k.apply(&czd, &[plaquette_key(pf, round), edge_key(e, round)])?;
    }
    Ok(())
}

/// The gate form of the full map: edge ancillas in `|1⟩`, then
/// `CL†_{i_e e} CR†_{f_e e}` per edge. Contracting the vertices with `⟨+|`
/// afterwards gives the map `|g_v⟩ ↦ |ḡ_{i_e} g_{f_e}⟩` up to `|G|^{-|V|/2}`.
pub fn entangle_g<K: Ket>(k: &mut K, cell: &Cellulation, group: &Arc<FiniteGroup>, round: u8) -> Result<()> {
    GEntangler::new(group).apply(k, cell, round)
}

/// The per-edge gates of [`entangle_g`], built once for repeated use.
pub struct GEntangler {
    group: Arc<FiniteGroup>,
    cld: LocalOperator,
    crd: LocalOperator,
}

impl GEntangler {
    pub fn new(group: &Arc<FiniteGroup>) -> Self {
        Self {
            group: group.clone(),
            cld: gates::controlled_left(group).adjoint(),
            crd: gates::controlled_right(group).adjoint(),
        }
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn apply<K: Ket>(&self, k: &mut K, cell: &Cellulation, round: u8) -> Result<()> {
        for e in 0..cell.num_edges() {
            k.add_site(edge_key(e, round), self.group.clone(), Init::Identity)?;
        }
        for (e, &(i, f)) in cell.edges().iter().enumerate() {
            k.apply(&self.cld, &[vertex_key(i, round), edge_key(e, round)])?;
            k.apply(&self.crd, &[vertex_key(f, round), edge_key(e, round)])?;
        }
        Ok(())
    }
}

/// Splits the vertices and applies `Σ⁻¹ Ω U^N` with `ℂ[N]` edge ancillas in `|1⟩`.
pub fn entangle_n_in_g<K: Ket>(k: &mut K, cell: &Cellulation, fs: &FactorSystem, round: u8) -> Result<()> {
    NgEntangler::new(fs).apply(k, cell, round)
}

/// The per-edge gates of [`entangle_n_in_g`], built once for repeated use.
pub struct NgEntangler<'a> {
    fs: &'a FactorSystem,
    cld: LocalOperator,
    crd: LocalOperator,
    omega: LocalOperator,
    sigma_inv: LocalOperator,
}

impl<'a> NgEntangler<'a> {
    pub fn new(fs: &'a FactorSystem) -> Self {
        let n = fs.n_group();
        Self {
            fs,
            cld: gates::controlled_left(n).adjoint(),
            crd: gates::controlled_right(n).adjoint(),
            omega: gates::omega_gate(fs),
            sigma_inv: gates::sigma_inv_gate(fs),
        }
    }

    pub fn factor_system(&self) -> &FactorSystem {
        self.fs
    }

    pub fn apply<K: Ket>(&self, k: &mut K, cell: &Cellulation, round: u8) -> Result<()> {
        split_vertices(k, cell, self.fs, round)?;
        let nkey = |v: usize| vertex_key(v, round).with_part(Part::Normal);
        let qkey = |v: usize| vertex_key(v, round + 1);
        for e in 0..cell.num_edges() {
            k.add_site(edge_key(e, round), self.fs.n_group().clone(), Init::Identity)?;
        }
        for (e, &(i, f)) in cell.edges().iter().enumerate() {
            let ek = edge_key(e, round);
            k.apply(&self.cld, &[nkey(i), ek])?;
            k.apply(&self.crd, &[nkey(f), ek])?;
            k.apply(&self.omega, &[qkey(i), ek, qkey(f)])?;
            k.apply(&self.sigma_inv, &[qkey(i), ek])?;
        }
        Ok(())
    }
}

/// Contracts every key with `⟨+|`.
pub fn postselect_all<K: Ket>(k: &mut K, keys: impl IntoIterator<Item = SiteKey>) -> Result<()> {
    for key in keys {
        k.project_plus(key)?;
    }
    Ok(())
}

/// Splits vertex `v` of round `round` into its `N` part (`.N`) and its `Q`
/// part, keyed as the next round's vertex.
pub fn split_vertices<K: Ket>(reg: &mut K, cell: &Cellulation, fs: &FactorSystem, round: u8) -> Result<()> {
    for v in 0..cell.num_vertices() {
        let key = vertex_key(v, round);
        reg.split_site(
            key,
            (key.with_part(Part::Normal), fs.n_group().clone()),
            (vertex_key(v, round + 1), fs.q_group().clone()),
            |g| (fs.tpart(g), fs.proj(g)),
        )?;
    }
    Ok(())
}

/// Gauges the normal subgroup `N` of a `G`-symmetric vertex state. Edge
/// ancillas `ℂ[N]` start in `|1⟩`; per edge the gates are `CL†` from the
/// initial vertex's `N` part, `CR†` from the final vertex's `N` part, `Ω`
/// and `Σ⁻¹`. The `N` parts are then measured and the charges repaired by a
/// dressed `Z̃`-string. Quotient parts stay live as the next round's vertices.
pub fn kw_n_in_g(
    mut reg: QuditRegister,
    cell: &Cellulation,
    fs: &FactorSystem,
    round: u8,
    measurer: &mut Measurer,
) -> Result<KwResult> {
    let (g, n) = (fs.parent(), fs.n_group());
    if !measurer.is_postselect() && !n.is_abelian() {
        return Err(Error::NotAbelian(format!(
            "{}: measured gauging of a non-abelian normal subgroup needs non-abelian string repair",
            n.name()
        )));
    }
    let vkeys: Vec<SiteKey> = (0..cell.num_vertices()).map(|v| vertex_key(v, round)).collect();
    check_site_groups(&reg, &vkeys, g)?;
    require_symmetric(&reg, &vkeys, g)?;
    entangle_n_in_g(&mut reg, cell, fs, round)?;
    let nkey = |v: usize| vertex_key(v, round).with_part(Part::Normal);
    let mut outcomes = Vec::with_capacity(cell.num_vertices());
    for v in 0..cell.num_vertices() {
        outcomes.push(measurer.measure(&mut reg, nkey(v))?);
    }
    let mut corrections = Vec::new();
    let pre = (!measurer.is_postselect()).then(|| reg.clone());
    if !measurer.is_postselect() {
        let labels = outcomes.iter().map(|o| o.outcome).collect();
        let plan = charge_correction(&SyndromeSet::charges(n.clone(), labels), cell, &cell.spanning_tree()?)?
            .with_basis(CorrectionBasis::DressedZ);
        apply_plan(&mut reg, &plan, n, cell, round, Some(fs))?;
        corrections.push(plan);
    }
    Ok(finish(reg, outcomes, corrections, pre))
}

/// The definitional map `⊗_v |g_v⟩ ↦ ⊗_e |ḡ_{i_e} g_{f_e}⟩` by direct
/// enumeration, acting on the vertex sites of `round` and leaving other
/// sites as spectators. The output is normalized unless it vanishes.
pub fn kw_exact_g(
    reg: &QuditRegister,
    cell: &Cellulation,
    group: &Arc<FiniteGroup>,
    round: u8,
) -> Result<QuditRegister> {
    let vkeys: Vec<SiteKey> = (0..cell.num_vertices()).map(|v| vertex_key(v, round)).collect();
    check_site_groups(reg, &vkeys, group)?;
    let mut src = reg.clone();
    let mut order: Vec<SiteKey> = src.keys().into_iter().filter(|k| !vkeys.contains(k)).collect();
    let rest = order.len();
    order.extend(&vkeys);
    src.reorder(&order)?;
    let d = group.order();
    let nv = cell.num_vertices();
    let ne = cell.num_edges();
    let vdim = d.pow(nv as u32);
    let edim = d.pow(ne as u32);
    // edge configuration index for each vertex configuration
    let mut target = Vec::with_capacity(vdim);
    let vdims = vec![d; nv];
    for j in 0..vdim {
        let gv = gates::decode(j, &vdims);
        let idx = cell.edges().iter().fold(0, |acc, &(i, f)| acc * d + group.ldiv(gv[i], gv[f]));
        target.push(idx);
    }
    let outer = src.amplitudes().len() / vdim;
    let mut out = vec![Complex64::new(0.0, 0.0); outer * edim];
    for o in 0..outer {
        for (j, &t) in target.iter().enumerate() {
            out[o * edim + t] += src.amplitudes()[o * vdim + j];
        }
    }
    let mut sites: Vec<Site> = src.sites()[..rest].to_vec();
    for e in 0..ne {
        sites.push(Site { key: edge_key(e, round), group: group.clone() });
    }
    let mut r = QuditRegister::from_amplitudes(sites, out)?;
    r.normalize();
    Ok(r)
}

/// `|+⟩` on every vertex of `round`.
pub fn plus_vertices(cell: &Cellulation, group: &Arc<FiniteGroup>, round: u8) -> Result<QuditRegister> {
    QuditRegister::init_plus((0..cell.num_vertices()).map(|v| (vertex_key(v, round), group.clone())))
}

/// Averages `reg` over simultaneous left multiplication of the `keys`
/// sites. The result is normalized unless it vanishes.
pub fn symmetrize(reg: &QuditRegister, keys: &[SiteKey], group: &FiniteGroup) -> Result<QuditRegister> {
    let mut acc = reg.clone();
    for g in group.elements().skip(1) {
        let op = gates::left_mult(group, g);
        let mut moved = reg.clone();
        for &k in keys {
            moved.apply(&op, &[k])?;
        }
        for (a, b) in acc.amplitudes_mut().iter_mut().zip(moved.amplitudes()) {
            *a += b;
        }
    }
    acc.normalize();
    Ok(acc)
}

/// A seeded random state on the vertices of `round`, made `G`-symmetric.
pub fn random_symmetric_vertices(
    cell: &Cellulation,
    group: &Arc<FiniteGroup>,
    round: u8,
    seed: u64,
) -> Result<QuditRegister> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<Site> =
        (0..cell.num_vertices()).map(|v| Site { key: vertex_key(v, round), group: group.clone() }).collect();
    let dim: usize = sites.iter().map(Site::dim).product();
    let amps = (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let reg = QuditRegister::from_amplitudes(sites, amps)?;
    let keys: Vec<SiteKey> = (0..cell.num_vertices()).map(|v| vertex_key(v, round)).collect();
    symmetrize(&reg, &keys, group)
}

/// `|+⟩` on every plaquette of `round`.
pub fn plus_plaquettes(cell: &Cellulation, group: &Arc<FiniteGroup>, round: u8) -> Result<QuditRegister> {
    QuditRegister::init_plus((0..cell.num_plaquettes()).map(|p| (plaquette_key(p, round), group.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{build_cyclic, catalog};

    fn z(n: usize) -> Arc<FiniteGroup> {
        Arc::new(build_cyclic(n).unwrap())
    }

    #[test]
    fn exact_map_on_single_edge() {
        let g = Arc::new(catalog::symmetric(3));
        let cell = Cellulation::single_edge();
        for a in g.elements() {
            for b in g.elements() {
                let mut amps = vec![Complex64::new(0.0, 0.0); 36];
                amps[a * 6 + b] = Complex64::new(1.0, 0.0);
                let sites = vec![
                    Site { key: vertex_key(0, 0), group: g.clone() },
                    Site { key: vertex_key(1, 0), group: g.clone() },
                ];
                let r = QuditRegister::from_amplitudes(sites, amps).unwrap();
                let out = kw_exact_g(&r, &cell, &g, 0).unwrap();
                assert_eq!(out.amplitudes()[g.ldiv(a, b)], Complex64::new(1.0, 0.0));
            }
        }
    }

    #[test]
    fn trivial_group_gives_product_state() {
        let g = z(1);
        let cell = Cellulation::square_torus(2, 2).unwrap();
        let r = plus_vertices(&cell, &g, 0).unwrap();
        let out = kw_abelian(r, &cell, &g, 0, &mut Measurer::new(&KwMode::Sample(1))).unwrap();
        assert_eq!(out.register.sites().len(), 8);
        assert!((out.register.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measured_matches_postselected() {
        let g = z(3);
        let cell = Cellulation::hexagon_torus();
        let r = plus_vertices(&cell, &g, 0).unwrap();
        let post = kw_abelian(r.clone(), &cell, &g, 0, &mut Measurer::new(&KwMode::PostselectPlus)).unwrap();
        let oracle = kw_exact_g(&r, &cell, &g, 0).unwrap();
        assert!((post.register.fidelity(&oracle).unwrap() - 1.0).abs() < 1e-10);
        for seed in 0..10 {
            let out = kw_abelian(r.clone(), &cell, &g, 0, &mut Measurer::new(&KwMode::Sample(seed))).unwrap();
            assert!(out.register.fidelity(&post.register).unwrap() > 1.0 - 1e-9);
        }
        let forced = BTreeMap::from([(vertex_key(0, 0), 1), (vertex_key(1, 0), 2)]);
        let out = kw_abelian(r, &cell, &g, 0, &mut Measurer::new(&KwMode::Forced(forced))).unwrap();
        assert!(out.register.fidelity(&post.register).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let g = z(2);
        let cell = Cellulation::single_edge();
        let r = QuditRegister::init_identity((0..2).map(|v| (vertex_key(v, 0), g.clone()))).unwrap();
        let err = kw_abelian(r, &cell, &g, 0, &mut Measurer::new(&KwMode::PostselectPlus)).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn dual_map_on_sphere_matches_direct_map() {
        for n in [2, 3] {
            let g = z(n);
            let cell = Cellulation::polygon_sphere(4).unwrap();
            let direct = kw_exact_g(&plus_vertices(&cell, &g, 0).unwrap(), &cell, &g, 0).unwrap();
            for seed in 0..5 {
                let out = kw_hat_abelian(
                    plus_plaquettes(&cell, &g, 0).unwrap(),
                    &cell,
                    &g,
                    0,
                    &mut Measurer::new(&KwMode::Sample(seed)),
                )
                .unwrap();
                assert!(out.register.fidelity(&direct).unwrap() > 1.0 - 1e-9, "Z{n} seed {seed}");
            }
        }
    }
}
