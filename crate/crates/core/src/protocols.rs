//! Quantum double preparation: one-shot abelian and nil-2 routes, and the
//! sequential route through a chain of factor systems.

use std::sync::Arc;

use serde::Serialize;

use crate::cellulation::Cellulation;
use crate::error::{Error, Result};
use crate::feedforward::{charge_correction, flux_correction, CorrectionPlan, SyndromeSet};
use crate::gates;
use crate::groups::{derived_series, factor_system_of, is_nil2_extension, FactorSystem, FiniteGroup, Subgroup};
use crate::kwmaps::{
    apply_plan_on, edge_key, kw_abelian, kw_n_in_g, plaquette_key, plus_vertices, vertex_key, KwMode, KwResult,
    Measurer, OutcomeRecord,
};
use crate::register::{Init, Ket, Part, QuditRegister, SiteKey};

/// One measurement layer with the unitaries before it and the corrections after it.
#[derive(Clone, Debug, Serialize)]
pub struct RoundRecord {
    pub layers: Vec<String>,
    pub outcomes: Vec<OutcomeRecord>,
    pub corrections: Vec<CorrectionPlan>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolTranscript {
    pub protocol: String,
    pub group: String,
    pub cell: String,
    pub mode: String,
    pub rounds: Vec<RoundRecord>,
    /// Number of measurement layers executed.
    pub shots: usize,
    pub fidelity_vs_oracle: Option<f64>,
    /// Output state on `edge(e)` sites carrying the full group.
    #[serde(skip)]
    pub register: QuditRegister,
    /// Single-shot protocols in measured modes: the merged edge state between
    /// measurement and correction.
    #[serde(skip)]
    pub pre_correction: Option<QuditRegister>,
}

impl ProtocolTranscript {
    /// Records and returns the fidelity of the output with `oracle`.
    pub fn score(&mut self, oracle: &QuditRegister) -> Result<f64> {
        let f = self.register.fidelity(oracle)?;
        self.fidelity_vs_oracle = Some(f);
        Ok(f)
    }
}

pub fn describe_mode(mode: &KwMode) -> String {
    match mode {
        KwMode::PostselectPlus => "postselect".into(),
        KwMode::Sample(s) => format!("sample:{s}"),
        KwMode::Forced(t) => {
            let parts: Vec<String> = t.iter().map(|(k, a)| format!("{k}={a}")).collect();
            format!("forced:{}", parts.join(","))
        }
    }
}

fn record(layers: &[&str], res: &KwResult) -> RoundRecord {
    RoundRecord {
        layers: layers.iter().map(|s| s.to_string()).collect(),
        outcomes: res.outcomes.clone(),
        corrections: res.corrections.clone(),
    }
}

/// The factor systems `(N_j/N_{j−1}) ◁ (G/N_{j−1})` along the derived series,
/// from the innermost term outwards. The last quotient is abelian and is
/// gauged directly. Empty for abelian groups.
pub fn derived_chain(g: &Arc<FiniteGroup>) -> Result<Vec<FactorSystem>> {
    let series = derived_series(g);
    let Some(l) = series.derived_length else {
        let core = series.terms.last().unwrap();
        return Err(Error::NotSolvable {
            group: g.name().to_string(),
            core: if core.is_whole() {
                g.name().to_string()
            } else {
                format!("order-{} core of {}", core.order(), g.name())
            },
            order: core.order(),
        });
    };
    let mut h = g.clone();
    let mut to_h: Vec<usize> = g.elements().collect();
    let mut chain = Vec::new();
    for j in 1..l {
        let term = &series.terms[l - j];
        let sub = Subgroup::new(h.clone(), term.members().iter().map(|&x| to_h[x]))?;
        let fs = factor_system_of(&h, &sub)?;
        to_h = to_h.iter().map(|&x| fs.proj(x)).collect();
        h = fs.q_group().clone();
        chain.push(fs);
    }
    Ok(chain)
}

/// Runs `kw_n_in_g` along `chain`, then `kw_abelian` on the last quotient,
/// then reassembles each edge into `ℂ[G]` through the chain.
fn gauge_chain(
    reg: QuditRegister,
    cell: &Cellulation,
    group: &Arc<FiniteGroup>,
    chain: &[FactorSystem],
    measurer: &mut Measurer,
) -> Result<(QuditRegister, Vec<RoundRecord>)> {
    let mut rounds = Vec::new();
    let mut reg = reg;
    for (r, fs) in chain.iter().enumerate() {
        let res = kw_n_in_g(reg, cell, fs, r as u8, measurer)?;
        rounds.push(record(&["split", "CL†·CR†", "Ω", "Σ⁻¹"], &res));
        reg = res.register;
    }
    let last = chain.last().map(|fs| fs.q_group().clone()).unwrap_or_else(|| group.clone());
    let res = kw_abelian(reg, cell, &last, chain.len() as u8, measurer)?;
    rounds.push(record(&["CX†·CX"], &res));
    reg = res.register;
    for (r, fs) in chain.iter().enumerate().rev() {
        let r = r as u8;
        for e in 0..cell.num_edges() {
            reg.merge_sites(edge_key(e, r), edge_key(e, r + 1), edge_key(e, r), fs.parent().clone(), |n, q| {
                fs.element(n, q)
            })?;
        }
    }
    Ok((reg, rounds))
}

fn transcript(
    protocol: &str,
    group: &FiniteGroup,
    cell: &Cellulation,
    mode: &KwMode,
    rounds: Vec<RoundRecord>,
    register: QuditRegister,
    pre_correction: Option<QuditRegister>,
) -> ProtocolTranscript {
    ProtocolTranscript {
        protocol: protocol.into(),
        group: group.name().into(),
        cell: cell.name().into(),
        mode: describe_mode(mode),
        shots: rounds.len(),
        rounds,
        fidelity_vs_oracle: None,
        register,
        pre_correction,
    }
}

/// Gauges `|+⟩^A` on the vertices in one shot.
pub fn prepare_abelian_double(
    group: &Arc<FiniteGroup>,
    cell: &Cellulation,
    mode: &KwMode,
) -> Result<ProtocolTranscript> {
    let mut m = Measurer::new(mode);
    let res = kw_abelian(plus_vertices(cell, group, 0)?, cell, group, 0, &mut m)?;
    let rounds = vec![record(&["CX†·CX"], &res)];
    Ok(transcript("abelian", group, cell, mode, rounds, res.register, res.pre_correction))
}

/// Two rounds: `N ◁ G`, then the abelian quotient.
pub fn prepare_metabelian_double(fs: &FactorSystem, cell: &Cellulation, mode: &KwMode) -> Result<ProtocolTranscript> {
    if !fs.n_group().is_abelian() || !fs.q_group().is_abelian() {
        return Err(Error::NotAbelian(format!(
            "{}: metabelian route needs abelian N and Q, got {} and {}",
            fs.parent().name(),
            fs.n_group().name(),
            fs.q_group().name()
        )));
    }
    let g = fs.parent();
    let mut m = Measurer::new(mode);
    let (reg, rounds) = gauge_chain(plus_vertices(cell, g, 0)?, cell, g, std::slice::from_ref(fs), &mut m)?;
    Ok(transcript("metabelian", g, cell, mode, rounds, reg, None))
}

/// One round per step of the derived series.
pub fn prepare_solvable_double(
    group: &Arc<FiniteGroup>,
    cell: &Cellulation,
    mode: &KwMode,
) -> Result<ProtocolTranscript> {
    let chain = derived_chain(group)?;
    let mut m = Measurer::new(mode);
    let (reg, rounds) = gauge_chain(plus_vertices(cell, group, 0)?, cell, group, &chain, &mut m)?;
    Ok(transcript("solvable", group, cell, mode, rounds, reg, None))
}

/// Gauges a supplied `G`-symmetric state on the round-0 vertex sites, along
/// `chain` if given and along the derived series otherwise.
pub fn gauge_input_state(
    input: QuditRegister,
    group: &Arc<FiniteGroup>,
    chain: Option<&[FactorSystem]>,
    cell: &Cellulation,
    mode: &KwMode,
) -> Result<ProtocolTranscript> {
    let owned;
    let chain = match chain {
        Some(c) => c,
        None => {
            owned = derived_chain(group)?;
            &owned
        }
    };
    if let Some(fs) = chain.first() {
        if **fs.parent() != **group {
            return Err(Error::InvalidFactorSystem("chain does not start at the input group".into()));
        }
    }
    let mut m = Measurer::new(mode);
    let (reg, rounds) = gauge_chain(input, cell, group, chain, &mut m)?;
    Ok(transcript("gauge_input", group, cell, mode, rounds, reg, None))
}

pub fn edge_n_key(e: usize) -> SiteKey {
    SiteKey::edge(e).with_part(Part::Normal)
}

pub fn edge_q_key(e: usize) -> SiteKey {
    SiteKey::edge(e).with_part(Part::Quotient)
}

/// Vertex `ℂ[Q]` sites and plaquette `ℂ[N]` sites in `|+⟩`.
pub fn nil2_input(fs: &FactorSystem, cell: &Cellulation) -> Result<QuditRegister> {
    let v = (0..cell.num_vertices()).map(|v| (vertex_key(v, 0), fs.q_group().clone(), Init::Plus));
    let p = (0..cell.num_plaquettes()).map(|p| (plaquette_key(p, 0), fs.n_group().clone(), Init::Plus));
    QuditRegister::product(v.chain(p))
}

/// The three unitary layers of the one-shot nil-2 circuit: edge parts
/// `|+⟩^N |1⟩^Q`, then `CZ_{i_ě} CZ†_{f_ě}` onto the `N` parts, then
/// `Ω_{VEV}`, then `CX†_{i_e} CX_{f_e}` onto the `Q` parts.
pub fn entangle_nil2<K: Ket>(k: &mut K, fs: &FactorSystem, cell: &Cellulation) -> Result<()> {
    let (n, q) = (fs.n_group(), fs.q_group());
    for e in 0..cell.num_edges() {
        k.add_site(edge_n_key(e), n.clone(), Init::Plus)?;
        k.add_site(edge_q_key(e), q.clone(), Init::Identity)?;
    }
    if cell.is_surface() {
        let cz = gates::cz_abelian(n)?;
        let czd = cz.adjoint();
        for e in 0..cell.num_edges() {
            let (pi, pf) = cell.dual_edge(e);
            k.apply(&cz, &[plaquette_key(pi, 0), edge_n_key(e)])?;
            k.apply(&czd, &[plaquette_key(pf, 0), edge_n_key(e)])?;
        }
    }
    let omega = gates::omega_gate(fs);
    for (e, &(i, f)) in cell.edges().iter().enumerate() {
        k.apply(&omega, &[vertex_key(i, 0), edge_n_key(e), vertex_key(f, 0)])?;
    }
    let cx = gates::cx_abelian(q)?;
    let cxd = cx.adjoint();
    for (e, &(i, f)) in cell.edges().iter().enumerate() {
        k.apply(&cxd, &[vertex_key(i, 0), edge_q_key(e)])?;
        k.apply(&cx, &[vertex_key(f, 0), edge_q_key(e)])?;
    }
    Ok(())
}

/// Merges `(edge(e).N, edge(e).Q)` into `edge(e)` over the extension.
pub fn merge_nil2_edges<K: Ket>(k: &mut K, fs: &FactorSystem, cell: &Cellulation) -> Result<()> {
    for e in 0..cell.num_edges() {
        k.merge_sites(edge_n_key(e), edge_q_key(e), SiteKey::edge(e), fs.parent().clone(), |n, q| fs.element(n, q))?;
    }
    Ok(())
}

/// The one-shot nil-2 protocol: one measurement layer over all vertices and
/// plaquettes, then `Z^q` strings on the `Q` parts and dual `X^n` strings on
/// the `N` parts.
pub fn prepare_nil2_double(fs: &FactorSystem, cell: &Cellulation, mode: &KwMode) -> Result<ProtocolTranscript> {
    if !is_nil2_extension(fs) {
        return Err(Error::InvalidFactorSystem(format!(
            "{}: not a central extension of abelian groups",
            fs.parent().name()
        )));
    }
    if !cell.is_surface() {
        return Err(Error::Unsupported("the one-shot nil-2 route needs plaquettes".into()));
    }
    let (n, q) = (fs.n_group(), fs.q_group());
    let mut reg = nil2_input(fs, cell)?;
    entangle_nil2(&mut reg, fs, cell)?;
    let mut m = Measurer::new(mode);
    let mut outcomes = Vec::new();
    for v in 0..cell.num_vertices() {
        outcomes.push(m.measure(&mut reg, vertex_key(v, 0))?);
    }
    for p in 0..cell.num_plaquettes() {
        outcomes.push(m.measure(&mut reg, plaquette_key(p, 0))?);
    }
    let mut corrections = Vec::new();
    let mut pre = None;
    if !m.is_postselect() {
        let mut snapshot = reg.clone();
        merge_nil2_edges(&mut snapshot, fs, cell)?;
        snapshot.normalize();
        pre = Some(snapshot);
        let nv = cell.num_vertices();
        let charges = outcomes[..nv].iter().map(|o| o.outcome).collect();
        let fluxes = outcomes[nv..].iter().map(|o| o.outcome).collect();
        let zplan = charge_correction(&SyndromeSet::charges(q.clone(), charges), cell, &cell.spanning_tree()?)?;
        let xplan = flux_correction(&SyndromeSet::fluxes(n.clone(), fluxes), cell, &cell.dual_spanning_tree()?)?;
        apply_plan_on(&mut reg, &zplan, q, cell, edge_q_key, |v| vertex_key(v, 0), None)?;
        apply_plan_on(&mut reg, &xplan, n, cell, edge_n_key, |v| vertex_key(v, 0), None)?;
        corrections = vec![zplan, xplan];
    }
    merge_nil2_edges(&mut reg, fs, cell)?;
    reg.normalize();
    let rounds =
        vec![RoundRecord { layers: vec!["CZ_PE".into(), "Ω_VEV".into(), "CX_VE".into()], outcomes, corrections }];
    Ok(transcript("nil2", fs.parent(), cell, mode, rounds, reg, pre))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::catalog;
    use crate::kwmaps::kw_exact_g;

    fn oracle(g: &Arc<FiniteGroup>, cell: &Cellulation) -> QuditRegister {
        kw_exact_g(&plus_vertices(cell, g, 0).unwrap(), cell, g, 0).unwrap()
    }

    #[test]
    fn shot_counts() {
        let cell = Cellulation::hexagon_torus();
        let s3 = catalog::by_name("S3").unwrap().group;
        let t = prepare_solvable_double(&s3, &cell, &KwMode::Sample(3)).unwrap();
        assert_eq!(t.shots, 2);
        assert!(t.register.fidelity(&oracle(&s3, &cell)).unwrap() > 1.0 - 1e-9);
        let z3 = catalog::by_name("Z3").unwrap().group;
        assert_eq!(prepare_solvable_double(&z3, &cell, &KwMode::Sample(3)).unwrap().shots, 1);
    }

    #[test]
    fn metabelian_route_matches_oracle() {
        let cell = Cellulation::hexagon_torus();
        let fs = catalog::s3_factor_system();
        for seed in 0..5 {
            let t = prepare_metabelian_double(&fs, &cell, &KwMode::Sample(seed)).unwrap();
            assert_eq!(t.shots, 2);
            assert!(t.register.fidelity(&oracle(fs.parent(), &cell)).unwrap() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn nil2_on_sphere_matches_oracle() {
        let cell = Cellulation::polygon_sphere(3).unwrap();
        for fs in [catalog::d4_factor_system(), catalog::q8_factor_system()] {
            for seed in 0..5 {
                let t = prepare_nil2_double(&fs, &cell, &KwMode::Sample(seed)).unwrap();
                assert_eq!(t.shots, 1);
                assert!(t.register.fidelity(&oracle(fs.parent(), &cell)).unwrap() > 1.0 - 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn a5_is_rejected() {
        let a5 = catalog::by_name("A5").unwrap().group;
        let err = derived_chain(&a5).unwrap_err();
        assert!(matches!(err, Error::NotSolvable { order: 60, .. }));
    }
}
