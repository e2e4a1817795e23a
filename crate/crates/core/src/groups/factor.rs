//! Factor systems `(σ, ω)` of group extensions `1 → N → G → Q → 1`.

use std::sync::Arc;

use super::{quotient, FiniteGroup, Subgroup};
use crate::error::{Error, Result};

/// Extension data together with the maps relating it to the parent group.
///
/// Parent elements decompose uniquely as `g = ι(t(g)) · s(π(g))`.
#[derive(Clone, Debug)]
pub struct FactorSystem {
    n_group: Arc<FiniteGroup>,
    q_group: Arc<FiniteGroup>,
    /// `sigma[q][n] = σ^q[n]`
    sigma: Vec<Vec<usize>>,
    /// `omega[q1][q2] = ω(q1, q2)`
    omega: Vec<Vec<usize>>,
    parent: Arc<FiniteGroup>,
    lift: Vec<usize>,
    embed: Vec<usize>,
    proj: Vec<usize>,
    tpart: Vec<usize>,
    /// `pair_to_parent[q * |N| + n] = ι(n) s(q)`
    pair_to_parent: Vec<usize>,
}

impl FactorSystem {
    /// Validates `(σ, ω)` and builds the extension group of pairs.
    pub fn from_data(
        name: impl Into<String>,
        n_group: Arc<FiniteGroup>,
        q_group: Arc<FiniteGroup>,
        sigma: Vec<Vec<usize>>,
        omega: Vec<Vec<usize>>,
    ) -> Result<Self> {
        validate(&n_group, &q_group, &sigma, &omega)?;
        let parent = Arc::new(build_extension(name.into(), &n_group, &q_group, &sigma, &omega)?);
        let (nn, nq) = (n_group.order(), q_group.order());
        let embed = (0..nn).collect();
        let lift = (0..nq).map(|q| q * nn).collect();
        let proj = (0..nn * nq).map(|i| i / nn).collect();
        let tpart = (0..nn * nq).map(|i| i % nn).collect();
        let pair_to_parent = (0..nn * nq).collect();
        Ok(Self { n_group, q_group, sigma, omega, parent, lift, embed, proj, tpart, pair_to_parent })
    }

    /// Trivial action and trivial cocycle: the direct product `N × Q`.
    pub fn split_trivial(n_group: Arc<FiniteGroup>, q_group: Arc<FiniteGroup>) -> Self {
        let sigma = vec![(0..n_group.order()).collect(); q_group.order()];
        let omega = vec![vec![0; q_group.order()]; q_group.order()];
        let name = format!("{}x{}", n_group.name(), q_group.name());
        Self::from_data(name, n_group, q_group, sigma, omega).expect("trivial data is valid")
    }

    pub fn n_group(&self) -> &Arc<FiniteGroup> {
        &self.n_group
    }

    pub fn q_group(&self) -> &Arc<FiniteGroup> {
        &self.q_group
    }

    pub fn parent(&self) -> &Arc<FiniteGroup> {
        &self.parent
    }

    pub fn sigma_table(&self) -> &[Vec<usize>] {
        &self.sigma
    }

    pub fn omega_table(&self) -> &[Vec<usize>] {
        &self.omega
    }

    #[inline]
    pub fn sigma(&self, q: usize, n: usize) -> usize {
        self.sigma[q][n]
    }

    /// `(σ^q)⁻¹[n]`
    pub fn sigma_inv(&self, q: usize, n: usize) -> usize {
        self.sigma[q].iter().position(|&x| x == n).expect("σ^q is a bijection")
    }

    #[inline]
    pub fn omega(&self, q1: usize, q2: usize) -> usize {
        self.omega[q1][q2]
    }

    /// The section `s: Q → G`.
    pub fn lift(&self, q: usize) -> usize {
        self.lift[q]
    }

    /// The injection `ι: N → G`.
    pub fn embed(&self, n: usize) -> usize {
        self.embed[n]
    }

    /// The projection `π: G → Q`.
    pub fn proj(&self, g: usize) -> usize {
        self.proj[g]
    }

    /// The (non-homomorphic) map `t: G → N`.
    pub fn tpart(&self, g: usize) -> usize {
        self.tpart[g]
    }

    /// `ι(n) s(q)`
    pub fn element(&self, n: usize, q: usize) -> usize {
        self.pair_to_parent[q * self.n_group.order() + n]
    }

    pub fn is_sigma_trivial(&self) -> bool {
        self.sigma.iter().all(|row| row.iter().enumerate().all(|(i, &x)| i == x))
    }

    pub fn is_omega_trivial(&self) -> bool {
        self.omega.iter().all(|row| row.iter().all(|&x| x == 0))
    }

    /// `σ^{q1} ∘ σ^{q2} = c^{ω(q1,q2)} ∘ σ^{q1 q2}` on every element of `N`.
    pub fn sigma_composition_holds(&self) -> bool {
        let (n, q) = (&self.n_group, &self.q_group);
        q.elements().all(|q1| {
            q.elements().all(|q2| {
                let w = self.omega(q1, q2);
                n.elements().all(|m| self.sigma(q1, self.sigma(q2, m)) == n.conj(w, self.sigma(q.mul(q1, q2), m)))
            })
        })
    }
}

fn validate(n: &FiniteGroup, q: &FiniteGroup, sigma: &[Vec<usize>], omega: &[Vec<usize>]) -> Result<()> {
    let (nn, nq) = (n.order(), q.order());
    let bad = |msg: String| Err(Error::InvalidFactorSystem(msg));
    if sigma.len() != nq || omega.len() != nq {
        return bad(format!("tables must have {nq} rows"));
    }
    for (qi, row) in sigma.iter().enumerate() {
        if row.len() != nn || row.iter().any(|&x| x >= nn) {
            return bad(format!("σ^{qi} is not a map on N"));
        }
        let mut seen = vec![false; nn];
        for &x in row {
            seen[x] = true;
        }
        if seen.iter().any(|s| !s) {
            return bad(format!("σ^{qi} is not a bijection"));
        }
        for a in 0..nn {
            for b in 0..nn {
                if row[n.mul(a, b)] != n.mul(row[a], row[b]) {
                    return bad(format!("σ^{qi} is not a homomorphism"));
                }
            }
        }
    }
    if sigma[0].iter().enumerate().any(|(i, &x)| i != x) {
        return bad("σ^1 is not the identity".into());
    }
    for row in omega {
        if row.len() != nq || row.iter().any(|&x| x >= nn) {
            return bad("ω is not a map Q×Q → N".into());
        }
    }
    for x in 0..nq {
        if omega[0][x] != 0 || omega[x][0] != 0 {
            return bad(format!("ω is not counital at {x}"));
        }
    }
    for q1 in 0..nq {
        for q2 in 0..nq {
            for q3 in 0..nq {
                let lhs = n.mul(sigma[q1][omega[q2][q3]], omega[q1][q.mul(q2, q3)]);
                let rhs = n.mul(omega[q1][q2], omega[q.mul(q1, q2)][q3]);
                if lhs != rhs {
                    return Err(Error::CocycleViolation { q1, q2, q3 });
                }
            }
        }
    }
    Ok(())
}

/// `(n1, q1)(n2, q2) = (n1 σ^{q1}[n2] ω(q1, q2), q1 q2)` on index `q * |N| + n`.
fn build_extension(
    name: String,
    n: &FiniteGroup,
    q: &FiniteGroup,
    sigma: &[Vec<usize>],
    omega: &[Vec<usize>],
) -> Result<FiniteGroup> {
    let (nn, nq) = (n.order(), q.order());
    let order = nn * nq;
    let mut mult = vec![0; order * order];
    for a in 0..order {
        let (n1, q1) = (a % nn, a / nn);
        for b in 0..order {
            let (n2, q2) = (b % nn, b / nn);
            let nprod = n.mul(n.mul(n1, sigma[q1][n2]), omega[q1][q2]);
            mult[a * order + b] = q.mul(q1, q2) * nn + nprod;
        }
    }
    FiniteGroup::from_flat(name, order, mult)
}

/// Rebuilds the group of pairs `(n, q)` from the factor data alone.
pub fn extension_from_factor_system(fs: &FactorSystem) -> Result<FiniteGroup> {
    validate(&fs.n_group, &fs.q_group, &fs.sigma, &fs.omega)?;
    let name = format!("ext({}, {})", fs.n_group.name(), fs.q_group.name());
    build_extension(name, &fs.n_group, &fs.q_group, &fs.sigma, &fs.omega)
}

/// Factor system of `N ◁ G` with the lowest-index coset representative as lift.
pub fn factor_system_of(g: &Arc<FiniteGroup>, n: &Subgroup) -> Result<FactorSystem> {
    if !Arc::ptr_eq(n.parent(), g) && **n.parent() != **g {
        return Err(Error::InvalidGroup("subgroup belongs to a different group".into()));
    }
    let quot = quotient(n, format!("{}/{}", g.name(), n.order()))?;
    let n_group = Arc::new(n.to_group(format!("N{}", n.order())));
    let q_group = Arc::new(quot.group);
    let (nn, nq) = (n_group.order(), q_group.order());
    let embed: Vec<usize> = n.members().to_vec();
    let lift = quot.reps.clone();
    let proj = quot.proj.clone();
    let index_in_n = |x: usize| n.index_of(x).expect("element lies in N");
    let tpart: Vec<usize> = g.elements().map(|x| index_in_n(g.mul(x, g.inv(lift[proj[x]])))).collect();
    let sigma: Vec<Vec<usize>> =
        (0..nq).map(|q| (0..nn).map(|m| index_in_n(g.conj(lift[q], embed[m]))).collect()).collect();
    let omega: Vec<Vec<usize>> = (0..nq)
        .map(|q1| {
            (0..nq)
                .map(|q2| {
                    let s12 = lift[q_group.mul(q1, q2)];
                    index_in_n(g.mul(g.mul(lift[q1], lift[q2]), g.inv(s12)))
                })
                .collect()
        })
        .collect();
    validate(&n_group, &q_group, &sigma, &omega)?;
    let mut pair_to_parent = vec![0; nn * nq];
    for q in 0..nq {
        for m in 0..nn {
            pair_to_parent[q * nn + m] = g.mul(embed[m], lift[q]);
        }
    }
    Ok(FactorSystem { n_group, q_group, sigma, omega, parent: g.clone(), lift, embed, proj, tpart, pair_to_parent })
}

/// Central extension of an abelian group by an abelian group.
pub fn is_nil2_extension(fs: &FactorSystem) -> bool {
    fs.n_group.is_abelian() && fs.q_group.is_abelian() && fs.is_sigma_trivial()
}

#[cfg(test)]
mod tests {
    use super::super::{build_cyclic, catalog, is_isomorphic, normal_subgroups};
    use super::*;

    #[test]
    fn table_extensions() {
        let d4 = catalog::d4_factor_system();
        let g = d4.parent();
        assert_eq!(g.order(), 8);
        assert!(!g.is_abelian());
        assert_eq!(super::super::center(g).order(), 2);
        assert_eq!(g.elements().filter(|&x| g.element_order(x) == 4).count(), 2);
        assert!(is_isomorphic(g, &catalog::dihedral_perm(4)));

        let q8 = catalog::q8_factor_system();
        let g = q8.parent();
        assert_eq!(g.elements().filter(|&x| g.element_order(x) == 2).count(), 1);
        assert!(is_isomorphic(g, &catalog::quaternion()));

        let s3 = catalog::s3_factor_system();
        assert!(is_isomorphic(s3.parent(), &catalog::symmetric(3)));
        assert!(is_nil2_extension(&d4));
        assert!(is_nil2_extension(&q8));
        assert!(!is_nil2_extension(&s3));
    }

    #[test]
    fn trivial_data_is_direct_product() {
        let n = Arc::new(build_cyclic(2).unwrap());
        let q = Arc::new(build_cyclic(3).unwrap());
        let fs = FactorSystem::split_trivial(n.clone(), q.clone());
        assert!(is_isomorphic(fs.parent(), &super::super::direct_product(&n, &q)));
        assert!(is_nil2_extension(&fs));
        let z1 = Arc::new(build_cyclic(1).unwrap());
        assert!(is_nil2_extension(&FactorSystem::split_trivial(z1.clone(), z1)));
    }

    #[test]
    fn cocycle_violation_reports_triple() {
        let n = Arc::new(build_cyclic(2).unwrap());
        let q = Arc::new(build_cyclic(3).unwrap());
        let sigma = vec![vec![0, 1]; 3];
        let mut omega = vec![vec![0; 3]; 3];
        omega[1][1] = 1; // not a cocycle
        let err = FactorSystem::from_data("bad", n, q, sigma, omega).unwrap_err();
        assert!(matches!(err, Error::CocycleViolation { .. }));
    }

    #[test]
    fn extracted_s3() {
        let g = Arc::new(catalog::symmetric(3));
        let a3 = super::super::commutator_subgroup(&g);
        let fs = factor_system_of(&g, &a3).unwrap();
        // σ^1 inverts Z3 and ω is trivial
        let n = fs.n_group();
        for m in n.elements() {
            assert_eq!(fs.sigma(1, m), n.inv(m));
        }
        assert!(fs.is_omega_trivial());
    }

    #[test]
    fn extracted_from_product() {
        let n = Arc::new(build_cyclic(3).unwrap());
        let q = Arc::new(build_cyclic(2).unwrap());
        let g = Arc::new(super::super::direct_product(&n, &q));
        // N = Z3 × {0} sits at indices {0, 2, 4}
        let sub = Subgroup::new(g.clone(), [0, 2, 4]).unwrap();
        let fs = factor_system_of(&g, &sub).unwrap();
        assert!(fs.is_sigma_trivial());
        assert!(fs.is_omega_trivial());
    }

    #[test]
    fn non_normal_rejected() {
        let g = Arc::new(catalog::symmetric(3));
        let t = g.elements().find(|&x| g.element_order(x) == 2).unwrap();
        let h = Subgroup::generated_by(&g, [t]);
        assert!(matches!(factor_system_of(&g, &h), Err(Error::NotNormal { .. })));
    }

    #[test]
    fn decomposition_and_composition_law() {
        for g in catalog::identity_suite_groups() {
            for n in normal_subgroups(&g) {
                let fs = factor_system_of(&g, &n).unwrap();
                for x in g.elements() {
                    assert_eq!(x, g.mul(fs.embed(fs.tpart(x)), fs.lift(fs.proj(x))));
                    assert_eq!(x, fs.element(fs.tpart(x), fs.proj(x)));
                }
                assert!(fs.sigma_composition_holds(), "{} / {}", g.name(), n.order());
                let rebuilt = extension_from_factor_system(&fs).unwrap();
                assert!(is_isomorphic(&rebuilt, &g));
            }
        }
    }
}
