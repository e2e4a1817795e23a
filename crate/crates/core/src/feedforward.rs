//! Abelian syndrome repair by spanning-tree transport.

use std::sync::Arc;

use serde::Serialize;

use crate::cellulation::{Cellulation, SpanningTree};
use crate::error::{Error, Result};
use crate::groups::FiniteGroup;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyndromeKind {
    /// Vertex outcomes, labelled by characters (identified with elements).
    Charge,
    /// Plaquette outcomes.
    Flux,
}

#[derive(Clone, Debug)]
pub struct SyndromeSet {
    pub kind: SyndromeKind,
    /// One label per vertex or plaquette.
    pub labels: Vec<usize>,
    pub group: Arc<FiniteGroup>,
}

impl SyndromeSet {
    pub fn charges(group: Arc<FiniteGroup>, labels: Vec<usize>) -> Self {
        Self { kind: SyndromeKind::Charge, labels, group }
    }

    pub fn fluxes(group: Arc<FiniteGroup>, labels: Vec<usize>) -> Self {
        Self { kind: SyndromeKind::Flux, labels, group }
    }

    /// Product of all labels.
    pub fn total(&self) -> usize {
        self.labels.iter().fold(0, |acc, &a| self.group.mul(acc, a))
    }

    pub fn is_trivial(&self) -> bool {
        self.labels.iter().all(|&a| a == 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionBasis {
    /// `Z^k` on direct edges.
    Z,
    /// `|x⟩ ↦ |x k⟩` on direct edges, driven by dual paths.
    X,
    /// The factor-system dressed `Z̃^k`, which also reads the endpoint
    /// vertices' quotient parts.
    DressedZ,
}

/// Per-edge exponents of a single correction layer. Only nontrivial
/// exponents are listed, in ascending edge order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorrectionPlan {
    pub basis: CorrectionBasis,
    pub exponents: Vec<(usize, usize)>,
}

impl CorrectionPlan {
    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn with_basis(self, basis: CorrectionBasis) -> Self {
        Self { basis, ..self }
    }

    /// The plan with every exponent inverted.
    pub fn inverse(&self, group: &FiniteGroup) -> Self {
        Self { basis: self.basis, exponents: self.exponents.iter().map(|&(e, k)| (e, group.inv(k))).collect() }
    }

    /// Exponent on each of `num_edges` edges (identity where absent).
    pub fn dense(&self, num_edges: usize) -> Vec<usize> {
        let mut c = vec![0; num_edges];
        for &(e, k) in &self.exponents {
            c[e] = k;
        }
        c
    }
}

/// Solves `Σ_{head(e)=v} c_e − Σ_{tail(e)=v} c_e = target_v` using only tree
/// edges, transporting from the leaves towards the root.
fn solve_on_tree(
    group: &FiniteGroup,
    arcs: &[(usize, usize)],
    tree: &SpanningTree,
    target: &[usize],
) -> Result<Vec<usize>> {
    let total = target.iter().fold(0, |acc, &a| group.mul(acc, a));
    if total != 0 {
        return Err(Error::NonzeroTotalCharge(total));
    }
    let mut need = target.to_vec();
    let mut c = vec![0; arcs.len()];
    for &v in tree.bfs_order().iter().rev() {
        let Some((e, p)) = tree.parent(v) else { continue };
        let (tail, head) = arcs[e];
        if head == v {
            // c_e contributes +c_e at v and −c_e at the parent
            c[e] = need[v];
            need[p] = group.mul(need[p], c[e]);
        } else {
            debug_assert_eq!(tail, v);
            c[e] = group.inv(need[v]);
            need[p] = group.mul(need[p], need[v]);
        }
        need[v] = 0;
    }
    debug_assert_eq!(need[tree.root()], 0);
    Ok(c)
}

/// `(∂c)_v = Σ_{head=v} c − Σ_{tail=v} c` on `n` nodes.
pub fn boundary(group: &FiniteGroup, arcs: &[(usize, usize)], n: usize, c: &[usize]) -> Vec<usize> {
    let mut b = vec![0; n];
    for (e, &(tail, head)) in arcs.iter().enumerate() {
        b[head] = group.mul(b[head], c[e]);
        b[tail] = group.mul(b[tail], group.inv(c[e]));
    }
    b
}

fn sparse(c: Vec<usize>) -> Vec<(usize, usize)> {
    c.into_iter().enumerate().filter(|&(_, k)| k != 0).collect()
}

fn require_abelian(s: &SyndromeSet) -> Result<()> {
    if !s.group.is_abelian() {
        return Err(Error::NotAbelian(s.group.name().to_string()));
    }
    Ok(())
}

/// Z-type plan `Z^{-c}` with `∂c = a` on the vertex tree.
pub fn charge_correction(s: &SyndromeSet, cell: &Cellulation, tree: &SpanningTree) -> Result<CorrectionPlan> {
    require_abelian(s)?;
    if s.kind != SyndromeKind::Charge || s.labels.len() != cell.num_vertices() {
        return Err(Error::Unsupported("charge correction needs one charge per vertex".into()));
    }
    let c = solve_on_tree(&s.group, cell.edges(), tree, &s.labels)?;
    let exps = c.into_iter().map(|k| s.group.inv(k)).collect();
    Ok(CorrectionPlan { basis: CorrectionBasis::Z, exponents: sparse(exps) })
}

/// X-type plan: shifts `d` with `Σ_{i_ě=p} d − Σ_{f_ě=p} d = a_p` on the dual tree.
pub fn flux_correction(s: &SyndromeSet, cell: &Cellulation, dual_tree: &SpanningTree) -> Result<CorrectionPlan> {
    require_abelian(s)?;
    if s.kind != SyndromeKind::Flux || s.labels.len() != cell.num_plaquettes() {
        return Err(Error::Unsupported("flux correction needs one flux per plaquette".into()));
    }
    let arcs: Vec<(usize, usize)> = (0..cell.num_edges()).map(|e| cell.dual_edge(e)).collect();
    let target: Vec<usize> = s.labels.iter().map(|&a| s.group.inv(a)).collect();
    let d = solve_on_tree(&s.group, &arcs, dual_tree, &target)?;
    Ok(CorrectionPlan { basis: CorrectionBasis::X, exponents: sparse(d) })
}

/// Vertex boundary of a Z-type plan, `∂(−exponent)`; equals the charges it repairs.
pub fn charge_boundary(plan: &CorrectionPlan, group: &FiniteGroup, cell: &Cellulation) -> Vec<usize> {
    let c: Vec<usize> = plan.dense(cell.num_edges()).into_iter().map(|k| group.inv(k)).collect();
    boundary(group, cell.edges(), cell.num_vertices(), &c)
}

/// Plaquette boundary of an X-type plan; equals the fluxes it repairs.
pub fn flux_boundary(plan: &CorrectionPlan, group: &FiniteGroup, cell: &Cellulation) -> Vec<usize> {
    let arcs: Vec<(usize, usize)> = (0..cell.num_edges()).map(|e| cell.dual_edge(e)).collect();
    let b = boundary(group, &arcs, cell.num_plaquettes(), &plan.dense(cell.num_edges()));
    b.into_iter().map(|x| group.inv(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::build_cyclic;

    fn z(n: usize) -> Arc<FiniteGroup> {
        Arc::new(build_cyclic(n).unwrap())
    }

    #[test]
    fn trivial_outcomes_give_empty_plans() {
        let cell = Cellulation::square_torus(2, 2).unwrap();
        let tree = cell.spanning_tree().unwrap();
        let p = charge_correction(&SyndromeSet::charges(z(2), vec![0; 4]), &cell, &tree).unwrap();
        assert!(p.is_empty());
        let dual = cell.dual_spanning_tree().unwrap();
        let p = flux_correction(&SyndromeSet::fluxes(z(2), vec![0; 4]), &cell, &dual).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn pair_on_single_edge() {
        let cell = Cellulation::single_edge();
        let tree = cell.spanning_tree().unwrap();
        let p = charge_correction(&SyndromeSet::charges(z(2), vec![1, 1]), &cell, &tree).unwrap();
        assert_eq!(p.exponents, vec![(0, 1)]);
    }

    #[test]
    fn boundaries_reproduce_syndromes() {
        let cell = Cellulation::hexagon_torus();
        let tree = cell.spanning_tree().unwrap();
        let g = z(3);
        let p = charge_correction(&SyndromeSet::charges(g.clone(), vec![1, 2]), &cell, &tree).unwrap();
        assert_eq!(charge_boundary(&p, &g, &cell), vec![1, 2]);

        let cell = Cellulation::square_torus(3, 2).unwrap();
        let dual = cell.dual_spanning_tree().unwrap();
        let g = z(4);
        let labels = vec![1, 0, 3, 2, 0, 2];
        let p = flux_correction(&SyndromeSet::fluxes(g.clone(), labels.clone()), &cell, &dual).unwrap();
        assert_eq!(flux_boundary(&p, &g, &cell), labels);
    }

    #[test]
    fn unpaired_flux_rejected() {
        let cell = Cellulation::square_torus(2, 2).unwrap();
        let dual = cell.dual_spanning_tree().unwrap();
        let err = flux_correction(&SyndromeSet::fluxes(z(2), vec![1, 0, 0, 0]), &cell, &dual).unwrap_err();
        assert_eq!(err, Error::NonzeroTotalCharge(1));
    }
}
