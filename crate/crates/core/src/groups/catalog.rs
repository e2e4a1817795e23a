//! Named groups and the JSON group catalog.
//!
//! Permutation groups index their elements in lexicographic order of the
//! image tuples, so the identity is element 0. Composition is
//! `(σ∘τ)(i) = σ(τ(i))`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::Deserialize;

use super::{build_cyclic, direct_product, FactorSystem, FiniteGroup};
use crate::error::{Error, Result};

/// A permutation group together with the permutation of each element.
pub(crate) struct PermGroup {
    pub group: FiniteGroup,
    pub perms: Vec<Vec<usize>>,
}

impl PermGroup {
    pub fn index_of(&self, p: &[usize]) -> usize {
        self.perms.binary_search_by(|x| x.as_slice().cmp(p)).expect("permutation is in the group")
    }
}

fn compose(a: &[usize], b: &[usize]) -> Vec<usize> {
    b.iter().map(|&i| a[i]).collect()
}

fn perm_group(name: &str, mut perms: Vec<Vec<usize>>) -> PermGroup {
    perms.sort();
    let index: HashMap<&[usize], usize> = perms.iter().enumerate().map(|(i, p)| (p.as_slice(), i)).collect();
    let n = perms.len();
    let mut mult = vec![0; n * n];
    for (i, a) in perms.iter().enumerate() {
        for (j, b) in perms.iter().enumerate() {
            mult[i * n + j] = index[compose(a, b).as_slice()];
        }
    }
    let group = FiniteGroup::from_flat(name.to_string(), n, mult).expect("permutations form a group");
    PermGroup { group, perms }
}

fn closure(degree: usize, gens: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let id: Vec<usize> = (0..degree).collect();
    let mut seen = BTreeSet::from([id.clone()]);
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = compose(&x, g);
            if seen.insert(y.clone()) {
                queue.push_back(y);
            }
        }
    }
    seen.into_iter().collect()
}

fn all_perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut gens = Vec::new();
    if n >= 2 {
        let mut t: Vec<usize> = (0..n).collect();
        t.swap(0, 1);
        gens.push(t);
        gens.push((0..n).map(|i| (i + 1) % n).collect());
    }
    closure(n, &gens)
}

fn is_even(p: &[usize]) -> bool {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 0
}

pub(crate) fn symmetric_perm(n: usize) -> PermGroup {
    perm_group(&format!("S{n}"), all_perms(n))
}

pub(crate) fn alternating_perm(n: usize) -> PermGroup {
    perm_group(&format!("A{n}"), all_perms(n).into_iter().filter(|p| is_even(p)).collect())
}

/// Dihedral group of the `n`-gon generated by the rotation `i ↦ i+1` and
/// the reflection `i ↦ -i`.
pub(crate) fn dihedral_perm_group(n: usize) -> PermGroup {
    let r: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let s: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
    perm_group(&format!("D{n}"), closure(n, &[r, s]))
}

pub fn symmetric(n: usize) -> FiniteGroup {
    symmetric_perm(n).group
}

pub fn alternating(n: usize) -> FiniteGroup {
    alternating_perm(n).group
}

/// Dihedral group of order `2n` as permutations of the `n`-gon's corners.
pub fn dihedral_perm(n: usize) -> FiniteGroup {
    dihedral_perm_group(n).group
}

/// Unit quaternions `{±1, ±i, ±j, ±k}` in the order `1, -1, i, -i, j, -j, k, -k`.
pub fn quaternion() -> FiniteGroup {
    // basis index (0=1, 1=i, 2=j, 3=k) and a sign
    let prod = |a: usize, b: usize| -> (usize, bool) {
        match (a, b) {
            (0, x) | (x, 0) => (x, false),
            (x, y) if x == y => (0, true),
            (1, 2) => (3, false),
            (2, 1) => (3, true),
            (2, 3) => (1, false),
            (3, 2) => (1, true),
            (3, 1) => (2, false),
            (1, 3) => (2, true),
            _ => unreachable!(),
        }
    };
    let mut table = vec![vec![0; 8]; 8];
    for x in 0..8 {
        for y in 0..8 {
            let (b, neg) = prod(x / 2, y / 2);
            let sign = (x % 2 == 1) ^ (y % 2 == 1) ^ neg;
            table[x][y] = 2 * b + usize::from(sign);
        }
    }
    FiniteGroup::from_table("Q8", &table).expect("quaternion table")
}

fn z2xz2() -> Arc<FiniteGroup> {
    let z2 = build_cyclic(2).unwrap();
    Arc::new(direct_product(&z2, &z2))
}

/// Central extension of `Q = Z2×Z2` (element `(a, b)` at index `2a + b`) by
/// `N = Z2` with cocycle `omega(a1, b1, a2, b2)`.
fn z2_central(name: &str, omega: impl Fn(usize, usize, usize, usize) -> usize) -> FactorSystem {
    let n = Arc::new(build_cyclic(2).unwrap());
    let q = z2xz2();
    let sigma = vec![vec![0, 1]; 4];
    let omega = (0..4).map(|x| (0..4).map(|y| omega(x / 2, x % 2, y / 2, y % 2) % 2).collect()).collect();
    FactorSystem::from_data(name, n, q, sigma, omega).expect("valid cocycle")
}

/// `ω((a1,b1),(a2,b2)) = a1 b2`.
pub fn d4_factor_system() -> FactorSystem {
    z2_central("D4", |a1, _b1, _a2, b2| a1 * b2)
}

/// `ω((a1,b1),(a2,b2)) = a1 a2 + a1 b2 + b1 b2`.
pub fn q8_factor_system() -> FactorSystem {
    z2_central("Q8", |a1, b1, a2, b2| a1 * a2 + a1 * b2 + b1 * b2)
}

/// `N = Z3`, `Q = Z2`, `σ^1[n] = -n`, trivial `ω`.
pub fn s3_factor_system() -> FactorSystem {
    let n = Arc::new(build_cyclic(3).unwrap());
    let q = Arc::new(build_cyclic(2).unwrap());
    let sigma = vec![vec![0, 1, 2], vec![0, 2, 1]];
    let omega = vec![vec![0; 2]; 2];
    FactorSystem::from_data("S3ext", n, q, sigma, omega).expect("valid factor system")
}

/// A resolved catalog group, with the extension data it was defined by, if any.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub group: Arc<FiniteGroup>,
    pub factor_system: Option<FactorSystem>,
}

impl CatalogEntry {
    fn plain(group: FiniteGroup) -> Self {
        Self { group: Arc::new(group), factor_system: None }
    }

    fn extension(fs: FactorSystem) -> Self {
        Self { group: fs.parent().clone(), factor_system: Some(fs) }
    }
}

/// Resolves a group name: `Zn`, `S3`, `S4`, `A4`, `A5`, `D4`, `Q8`, or a
/// product such as `Z2xZ3`. Names in `extra` take precedence.
pub fn lookup(name: &str, extra: &[CatalogEntry]) -> Result<CatalogEntry> {
    let name = name.trim();
    if let Some(e) = extra.iter().find(|e| e.group.name() == name) {
        return Ok(e.clone());
    }
    if name.contains('x') {
        let mut parts = name.split('x');
        let first = lookup(parts.next().unwrap(), extra)?;
        let mut acc = first.group.with_name(first.group.name());
        for p in parts {
            let next = lookup(p, extra)?;
            acc = direct_product(&acc, &next.group);
        }
        return Ok(CatalogEntry::plain(acc.with_name(name)));
    }
    let entry = match name {
        "S3" => CatalogEntry::plain(symmetric(3)),
        "S4" => CatalogEntry::plain(symmetric(4)),
        "A4" => CatalogEntry::plain(alternating(4)),
        "A5" => CatalogEntry::plain(alternating(5)),
        "D4" => CatalogEntry::extension(d4_factor_system()),
        "Q8" => CatalogEntry::extension(q8_factor_system()),
        _ => {
            let n = name
                .strip_prefix('Z')
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse(format!("unknown group '{name}'")))?;
            CatalogEntry::plain(build_cyclic(n)?)
        }
    };
    Ok(entry)
}

pub fn by_name(name: &str) -> Result<CatalogEntry> {
    lookup(name, &[])
}

/// The groups exercised by the operator-identity suite.
pub fn identity_suite_groups() -> Vec<Arc<FiniteGroup>> {
    ["Z2", "Z3", "Z2xZ2", "S3", "D4", "Q8", "A4", "S4"]
        .iter()
        .map(|n| by_name(n).expect("catalog name").group)
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtensionDoc {
    n: String,
    q: String,
    sigma: Vec<Vec<usize>>,
    omega: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EntryDoc {
    Table { name: String, order: usize, mult_table: Vec<Vec<usize>> },
    Extension { name: String, extension: ExtensionDoc },
}

/// Parses a JSON array of `{name, order, mult_table}` or
/// `{name, extension: {n, q, sigma, omega}}` entries. Extension entries may
/// refer to built-in names or to entries earlier in the same document.
pub fn load_catalog(json: &str) -> Result<Vec<CatalogEntry>> {
    let docs: Vec<EntryDoc> = serde_json::from_str(json)?;
    let mut out: Vec<CatalogEntry> = Vec::new();
    for doc in docs {
        let entry = match doc {
            EntryDoc::Table { name, order, mult_table } => {
                if mult_table.len() != order {
                    return Err(Error::InvalidGroup(format!(
                        "{name}: declared order {order} but table has {} rows",
                        mult_table.len()
                    )));
                }
                CatalogEntry::plain(FiniteGroup::from_table(name, &mult_table)?)
            }
            EntryDoc::Extension { name, extension } => {
                let n = lookup(&extension.n, &out)?.group;
                let q = lookup(&extension.q, &out)?.group;
                let fs = FactorSystem::from_data(name, n, q, extension.sigma, extension.omega)?;
                CatalogEntry::extension(fs)
            }
        };
        out.push(entry);
    }
    Ok(out)
}
