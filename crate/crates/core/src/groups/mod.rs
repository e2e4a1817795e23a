//! Finite groups as explicit multiplication tables.
//!
//! Elements are dense indices `0..order` and index 0 is always the identity.
//! Every derived object (subgroups, quotients, factor systems) is expressed in
//! terms of these indices, so all group arithmetic is a table lookup.

mod abelian;
pub mod catalog;
mod factor;
mod irreps;
mod iso;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::{Arc, OnceLock};

pub use abelian::AbelianPairing;
pub use factor::{extension_from_factor_system, factor_system_of, is_nil2_extension, FactorSystem};
pub use irreps::{irrep_table, Irrep, IrrepTable};
pub use iso::{find_isomorphism, is_isomorphic};

use crate::error::{Error, Result};

/// A finite group given by its Cayley table.
#[derive(Clone)]
pub struct FiniteGroup {
    name: String,
    order: usize,
    mult: Vec<usize>,
    inv: Vec<usize>,
    pairing: OnceLock<Option<AbelianPairing>>,
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteGroup").field("name", &self.name).field("order", &self.order).finish()
    }
}

impl PartialEq for FiniteGroup {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.mult == other.mult
    }
}

impl FiniteGroup {
    /// Builds a group from a full multiplication table, checking closure,
    /// associativity, the identity at index 0 and two-sided inverses.
    pub fn from_table(name: impl Into<String>, table: &[Vec<usize>]) -> Result<Self> {
        let name = name.into();
        let order = table.len();
        if order == 0 {
            return Err(Error::InvalidGroup(format!("{name}: empty table")));
        }
        let mut mult = Vec::with_capacity(order * order);
        for (a, row) in table.iter().enumerate() {
            if row.len() != order {
                return Err(Error::InvalidGroup(format!("{name}: row {a} has length {}", row.len())));
            }
            for &x in row {
                if x >= order {
                    return Err(Error::InvalidGroup(format!("{name}: entry {x} out of range")));
                }
            }
            mult.extend_from_slice(row);
        }
        Self::from_flat(name, order, mult)
    }

    pub(crate) fn from_flat(name: String, order: usize, mult: Vec<usize>) -> Result<Self> {
        for a in 0..order {
            if mult[a] != a || mult[a * order] != a {
                return Err(Error::InvalidGroup(format!("{name}: index 0 is not the identity")));
            }
        }
        let mut inv = vec![usize::MAX; order];
        for a in 0..order {
            let row = &mult[a * order..(a + 1) * order];
            let mut seen = vec![false; order];
            for &x in row {
                if seen[x] {
                    return Err(Error::InvalidGroup(format!("{name}: row {a} is not a permutation")));
                }
                seen[x] = true;
            }
            let b = row.iter().position(|&x| x == 0).unwrap();
            if mult[b * order + a] != 0 {
                return Err(Error::InvalidGroup(format!("{name}: element {a} has no two-sided inverse")));
            }
            inv[a] = b;
        }
        for a in 0..order {
            for b in 0..order {
                let ab = mult[a * order + b];
                for c in 0..order {
                    if mult[ab * order + c] != mult[a * order + mult[b * order + c]] {
                        return Err(Error::InvalidGroup(format!("{name}: associativity fails at ({a}, {b}, {c})")));
                    }
                }
            }
        }
        Ok(Self { name, order, mult, inv, pairing: OnceLock::new() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            order: self.order,
            mult: self.mult.clone(),
            inv: self.inv.clone(),
            pairing: OnceLock::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        0
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mult[a * self.order + b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    /// `a⁻¹ b`, the domain-wall variable between `a` and `b`.
    #[inline]
    pub fn ldiv(&self, a: usize, b: usize) -> usize {
        self.mul(self.inv[a], b)
    }

    /// `g h g⁻¹`.
    #[inline]
    pub fn conj(&self, g: usize, h: usize) -> usize {
        self.mul(self.mul(g, h), self.inv[g])
    }

    /// `g h g⁻¹ h⁻¹`.
    #[inline]
    pub fn commutator(&self, g: usize, h: usize) -> usize {
        self.mul(self.mul(g, h), self.mul(self.inv[g], self.inv[h]))
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        self.mult.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    pub fn element_order(&self, g: usize) -> usize {
        let mut x = g;
        let mut k = 1;
        while x != 0 {
            x = self.mul(x, g);
            k += 1;
        }
        k
    }

    pub fn is_abelian(&self) -> bool {
        self.elements().all(|a| (0..a).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// Canonical self-duality of an abelian group, or `None` for non-abelian groups.
    pub fn pairing(&self) -> Option<&AbelianPairing> {
        self.pairing.get_or_init(|| AbelianPairing::new(self)).as_ref()
    }

    pub fn require_pairing(&self) -> Result<&AbelianPairing> {
        self.pairing().ok_or_else(|| Error::NotAbelian(self.name.clone()))
    }

    /// Sorted closure of `gens` under multiplication.
    pub fn generate(&self, gens: impl IntoIterator<Item = usize>) -> Vec<usize> {
        let mut members = BTreeSet::from([0]);
        let gens: Vec<usize> = gens.into_iter().filter(|&g| g != 0).collect();
        let mut queue: VecDeque<usize> = VecDeque::from([0]);
        while let Some(x) = queue.pop_front() {
            for &g in &gens {
                let y = self.mul(x, g);
                if members.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        members.into_iter().collect()
    }

    pub fn conjugacy_classes(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.order];
        let mut classes = Vec::new();
        for a in self.elements() {
            if seen[a] {
                continue;
            }
            let class: BTreeSet<usize> = self.elements().map(|g| self.conj(g, a)).collect();
            for &c in &class {
                seen[c] = true;
            }
            classes.push(class.into_iter().collect());
        }
        classes
    }
}

/// Z_n with addition; element `k` is the residue `k`.
pub fn build_cyclic(n: usize) -> Result<FiniteGroup> {
    if n == 0 {
        return Err(Error::InvalidGroup("cyclic group of order 0".into()));
    }
    let mult = (0..n * n).map(|i| (i / n + i % n) % n).collect();
    FiniteGroup::from_flat(format!("Z{n}"), n, mult)
}

/// Componentwise product; element `(x, y)` has index `x * |b| + y`.
pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> FiniteGroup {
    let (na, nb) = (a.order(), b.order());
    let n = na * nb;
    let mut mult = vec![0; n * n];
    for x in 0..n {
        for y in 0..n {
            let (x1, x2) = (x / nb, x % nb);
            let (y1, y2) = (y / nb, y % nb);
            mult[x * n + y] = a.mul(x1, y1) * nb + b.mul(x2, y2);
        }
    }
    FiniteGroup::from_flat(format!("{}x{}", a.name(), b.name()), n, mult).expect("product of groups is a group")
}

/// A subgroup, stored as the sorted list of its parent indices.
#[derive(Clone, Debug)]
pub struct Subgroup {
    parent: Arc<FiniteGroup>,
    members: Vec<usize>,
}

impl PartialEq for Subgroup {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members && *self.parent == *other.parent
    }
}

impl Subgroup {
    /// Validates closure and inverses of `members`.
    pub fn new(parent: Arc<FiniteGroup>, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = members.into_iter().collect();
        if !set.contains(&0) {
            return Err(Error::InvalidGroup("subgroup does not contain the identity".into()));
        }
        for &a in &set {
            if a >= parent.order() || !set.contains(&parent.inv(a)) {
                return Err(Error::InvalidGroup(format!("subgroup not closed under inverse at {a}")));
            }
            for &b in &set {
                if !set.contains(&parent.mul(a, b)) {
                    return Err(Error::InvalidGroup(format!("subgroup not closed at ({a}, {b})")));
                }
            }
        }
        Ok(Self { parent, members: set.into_iter().collect() })
    }

    pub fn generated_by(parent: &Arc<FiniteGroup>, gens: impl IntoIterator<Item = usize>) -> Self {
        let members = parent.generate(gens);
        Self { parent: parent.clone(), members }
    }

    pub fn whole(parent: &Arc<FiniteGroup>) -> Self {
        Self { parent: parent.clone(), members: parent.elements().collect() }
    }

    pub fn trivial(parent: &Arc<FiniteGroup>) -> Self {
        Self { parent: parent.clone(), members: vec![0] }
    }

    pub fn parent(&self) -> &Arc<FiniteGroup> {
        &self.parent
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, g: usize) -> bool {
        self.members.binary_search(&g).is_ok()
    }

    pub fn is_trivial(&self) -> bool {
        self.members.len() == 1
    }

    pub fn is_whole(&self) -> bool {
        self.members.len() == self.parent.order()
    }

    pub fn is_normal(&self) -> bool {
        let g = &self.parent;
        g.elements().all(|x| self.members.iter().all(|&n| self.contains(g.conj(x, n))))
    }

    pub fn is_subgroup_of(&self, other: &Subgroup) -> bool {
        self.members.iter().all(|&m| other.contains(m))
    }

    /// Re-indexes the subgroup as a standalone group; element `k` of the
    /// result is `members()[k]` of the parent.
    pub fn to_group(&self, name: impl Into<String>) -> FiniteGroup {
        let n = self.members.len();
        let mut mult = vec![0; n * n];
        for (i, &a) in self.members.iter().enumerate() {
            for (j, &b) in self.members.iter().enumerate() {
                let ab = self.parent.mul(a, b);
                mult[i * n + j] = self.members.binary_search(&ab).expect("closed");
            }
        }
        FiniteGroup::from_flat(name.into(), n, mult).expect("subgroup is a group")
    }

    pub fn index_of(&self, g: usize) -> Option<usize> {
        self.members.binary_search(&g).ok()
    }
}

/// `[H, H]` for a subgroup `H` of `G`, as a subgroup of `G`.
pub fn commutator_of(h: &Subgroup) -> Subgroup {
    let g = h.parent();
    let comms: BTreeSet<usize> =
        h.members().iter().flat_map(|&a| h.members().iter().map(move |&b| g.commutator(a, b))).collect();
    Subgroup::generated_by(g, comms)
}

pub fn commutator_subgroup(g: &Arc<FiniteGroup>) -> Subgroup {
    commutator_of(&Subgroup::whole(g))
}

/// The derived series `G = N~0 ⊃ N~1 ⊃ …` up to its stabilization point.
#[derive(Clone, Debug)]
pub struct DerivedSeries {
    /// `terms[0]` is the whole group; the last entry is the stabilization point.
    pub terms: Vec<Subgroup>,
    /// `Some(l)` when the series reaches the trivial group after `l` steps.
    pub derived_length: Option<usize>,
}

impl DerivedSeries {
    pub fn is_solvable(&self) -> bool {
        self.derived_length.is_some()
    }

    pub fn perfect_core(&self) -> &Subgroup {
        self.terms.last().expect("series is never empty")
    }

    pub fn orders(&self) -> Vec<usize> {
        self.terms.iter().map(Subgroup::order).collect()
    }
}

pub fn derived_series(g: &Arc<FiniteGroup>) -> DerivedSeries {
    let mut terms = vec![Subgroup::whole(g)];
    loop {
        let last = terms.last().unwrap();
        if last.is_trivial() {
            break;
        }
        let next = commutator_of(last);
        if next.order() == last.order() {
            break;
        }
        terms.push(next);
    }
    let derived_length = terms.last().unwrap().is_trivial().then(|| terms.len() - 1);
    DerivedSeries { terms, derived_length }
}

pub fn center(g: &Arc<FiniteGroup>) -> Subgroup {
    let members = g.elements().filter(|&a| g.elements().all(|b| g.mul(a, b) == g.mul(b, a)));
    Subgroup { parent: g.clone(), members: members.collect() }
}

pub fn perfect_core(g: &Arc<FiniteGroup>) -> Subgroup {
    derived_series(g).perfect_core().clone()
}

/// A quotient `G/N` with its projection and coset representatives.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub group: FiniteGroup,
    /// `proj[g]` is the coset index of `g`.
    pub proj: Vec<usize>,
    /// Lowest-index element of each coset; `reps[0] = 0`.
    pub reps: Vec<usize>,
}

pub fn quotient(n: &Subgroup, name: impl Into<String>) -> Result<Quotient> {
    let g = n.parent();
    if !n.is_normal() {
        return Err(Error::NotNormal { group: g.name().to_string() });
    }
    let mut proj = vec![usize::MAX; g.order()];
    let mut reps = Vec::new();
    for a in g.elements() {
        if proj[a] != usize::MAX {
            continue;
        }
        let k = reps.len();
        reps.push(a);
        for &m in n.members() {
            proj[g.mul(a, m)] = k;
        }
    }
    let q = reps.len();
    let mut mult = vec![0; q * q];
    for (i, &a) in reps.iter().enumerate() {
        for (j, &b) in reps.iter().enumerate() {
            mult[i * q + j] = proj[g.mul(a, b)];
        }
    }
    let group = FiniteGroup::from_flat(name.into(), q, mult)?;
    Ok(Quotient { group, proj, reps })
}

pub fn central_quotient(g: &Arc<FiniteGroup>) -> FiniteGroup {
    let z = center(g);
    quotient(&z, format!("{}/Z", g.name())).expect("center is normal").group
}

/// All normal subgroups, ordered by size then members.
pub fn normal_subgroups(g: &Arc<FiniteGroup>) -> Vec<Subgroup> {
    let closures: Vec<Vec<usize>> =
        g.conjugacy_classes().iter().map(|class| g.generate(class.iter().copied())).collect();
    let mut found: BTreeSet<Vec<usize>> = closures.iter().cloned().collect();
    found.insert(vec![0]);
    loop {
        let current: Vec<Vec<usize>> = found.iter().cloned().collect();
        let mut grew = false;
        for a in &current {
            for b in &closures {
                let joined = g.generate(a.iter().chain(b.iter()).copied());
                if found.insert(joined) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    let mut out: Vec<Subgroup> = found.into_iter().map(|members| Subgroup { parent: g.clone(), members }).collect();
    out.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.members.cmp(&b.members)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(g: FiniteGroup) -> Arc<FiniteGroup> {
        Arc::new(g)
    }

    #[test]
    fn cyclic_basics() {
        assert!(build_cyclic(0).is_err());
        let z1 = build_cyclic(1).unwrap();
        assert_eq!(z1.order(), 1);
        let z2 = build_cyclic(2).unwrap();
        assert_eq!(z2.mul(1, 1), 0);
        let z4 = build_cyclic(4).unwrap();
        let order_two: Vec<usize> = z4.elements().filter(|&g| z4.element_order(g) == 2).collect();
        assert_eq!(order_two, vec![2]);
    }

    #[test]
    fn products() {
        let z2 = build_cyclic(2).unwrap();
        let v4 = direct_product(&z2, &z2);
        assert_eq!(v4.order(), 4);
        assert_eq!(v4.elements().filter(|&g| v4.element_order(g) == 2).count(), 3);
        let z1 = build_cyclic(1).unwrap();
        let s3 = catalog::symmetric(3);
        assert!(is_isomorphic(&direct_product(&z1, &s3), &s3));
        let z6 = direct_product(&z2, &build_cyclic(3).unwrap());
        assert!(z6.is_abelian());
        assert!(z6.elements().any(|g| z6.element_order(g) == 6));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(FiniteGroup::from_table("bad", &[vec![0, 1], vec![1, 1]]).is_err());
        // identity not at index 0
        assert!(FiniteGroup::from_table("bad", &[vec![1, 0], vec![0, 1]]).is_err());
        // a Latin square with identity that is not associative
        let t = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(FiniteGroup::from_table("loop", &t).is_err());
    }

    #[test]
    fn commutators_and_series() {
        let s3 = arc(catalog::symmetric(3));
        assert_eq!(commutator_subgroup(&s3).order(), 3);
        let s4 = arc(catalog::symmetric(4));
        assert_eq!(commutator_subgroup(&s4).order(), 12);
        let ds = derived_series(&s4);
        assert_eq!(ds.orders(), vec![24, 12, 4, 1]);
        assert_eq!(ds.derived_length, Some(3));
        let z6 = arc(build_cyclic(6).unwrap());
        assert!(commutator_subgroup(&z6).is_trivial());
        assert_eq!(derived_series(&z6).derived_length, Some(1));
        let a5 = arc(catalog::alternating(5));
        let ds = derived_series(&a5);
        assert!(!ds.is_solvable());
        assert_eq!(ds.perfect_core().order(), 60);
        let z1 = arc(build_cyclic(1).unwrap());
        assert_eq!(derived_series(&z1).derived_length, Some(0));
    }

    #[test]
    fn centers_and_quotients() {
        let d4 = arc(catalog::dihedral_perm(4));
        assert_eq!(center(&d4).order(), 2);
        assert_eq!(central_quotient(&d4).order(), 4);
        let s3 = arc(catalog::symmetric(3));
        assert!(center(&s3).is_trivial());
        let z5 = arc(build_cyclic(5).unwrap());
        assert!(center(&z5).is_whole());
        let a5 = arc(catalog::alternating(5));
        assert_eq!(central_quotient(&a5).order(), 60);
        assert!(perfect_core(&s3).is_trivial());
    }

    #[test]
    fn normal_subgroup_counts() {
        // S3: 1, A3, S3.  D4: 1, Z, three of order 4, D4.  S4: 1, V4, A4, S4.
        let s3 = arc(catalog::symmetric(3));
        assert_eq!(normal_subgroups(&s3).len(), 3);
        let d4 = arc(catalog::dihedral_perm(4));
        assert_eq!(normal_subgroups(&d4).len(), 6);
        let s4 = arc(catalog::symmetric(4));
        let orders: Vec<usize> = normal_subgroups(&s4).iter().map(Subgroup::order).collect();
        assert_eq!(orders, vec![1, 4, 12, 24]);
        for n in normal_subgroups(&s4) {
            assert!(n.is_normal());
        }
    }

    #[test]
    fn non_normal_quotient_rejected() {
        let s3 = arc(catalog::symmetric(3));
        let t = s3.elements().find(|&g| s3.element_order(g) == 2).unwrap();
        let h = Subgroup::generated_by(&s3, [t]);
        assert!(matches!(quotient(&h, "x"), Err(Error::NotNormal { .. })));
    }
}
