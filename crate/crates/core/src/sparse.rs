//! Sparse basis expansions: states stored as a map from basis labels to
//! amplitudes. Maps built from monomial gates and contractions keep basis
//! inputs sparse, which makes exact operator comparisons cheap even where the
//! dense register would not fit.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gates::decode;
use crate::groups::FiniteGroup;
use crate::register::{Init, Ket, LocalOperator, OpKind, QuditRegister, Site, SiteKey};

/// Amplitudes below this magnitude are dropped after each operation.
const PRUNE: f64 = 1e-14;

#[derive(Clone, Debug, Default)]
pub struct SparseKet {
    sites: Vec<Site>,
    terms: HashMap<Vec<usize>, Complex64>,
}

impl SparseKet {
    /// The empty product: one unit term over no sites.
    pub fn unit() -> Self {
        Self { sites: Vec::new(), terms: HashMap::from([(Vec::new(), Complex64::new(1.0, 0.0))]) }
    }

    /// A single basis state.
    pub fn basis(sites: Vec<Site>, labels: Vec<usize>) -> Result<Self> {
        if sites.len() != labels.len() || sites.iter().zip(&labels).any(|(s, &x)| x >= s.dim()) {
            return Err(Error::Register("basis labels do not fit the sites".into()));
        }
        Ok(Self { sites, terms: HashMap::from([(labels, Complex64::new(1.0, 0.0))]) })
    }

    /// Builds a state from explicit terms; labels must fit the sites.
    pub fn from_terms(sites: Vec<Site>, terms: HashMap<Vec<usize>, Complex64>) -> Result<Self> {
        for l in terms.keys() {
            if l.len() != sites.len() || sites.iter().zip(l).any(|(s, &x)| x >= s.dim()) {
                return Err(Error::Register("term labels do not fit the sites".into()));
            }
        }
        let mut k = Self { sites, terms };
        k.prune();
        Ok(k)
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn keys(&self) -> Vec<SiteKey> {
        self.sites.iter().map(|s| s.key).collect()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Complex64)> {
        self.terms.iter()
    }

    pub fn position(&self, key: SiteKey) -> Result<usize> {
        self.sites.iter().position(|s| s.key == key).ok_or_else(|| Error::Register(format!("no site {key}")))
    }

    /// Largest amplitude magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: Complex64) {
        self.terms.values_mut().for_each(|a| *a *= s);
    }

    fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() > PRUNE);
    }

    /// Amplitude of a basis label given in the order of `keys`.
    pub fn amplitude_in(&self, keys: &[SiteKey], labels: &[usize]) -> Result<Complex64> {
        let perm = self.permutation_to(keys)?;
        let mut own = vec![0; labels.len()];
        for (i, &p) in perm.iter().enumerate() {
            own[p] = labels[i];
        }
        Ok(self.terms.get(&own).copied().unwrap_or_default())
    }

    /// Positions of `keys` in this state; `keys` must be a permutation of the live keys.
    pub fn permutation_to(&self, keys: &[SiteKey]) -> Result<Vec<usize>> {
        if keys.len() != self.sites.len() {
            return Err(Error::LayoutMismatch(format!("{} keys for {} sites", keys.len(), self.sites.len())));
        }
        keys.iter().map(|&k| self.position(k)).collect()
    }

    /// Terms relabelled into the site order of `keys`.
    pub fn terms_in(&self, keys: &[SiteKey]) -> Result<HashMap<Vec<usize>, Complex64>> {
        let perm = self.permutation_to(keys)?;
        Ok(self.terms.iter().map(|(l, &a)| (perm.iter().map(|&p| l[p]).collect(), a)).collect())
    }

    /// Dense copy, with sites in the current order.
    pub fn to_dense(&self) -> Result<QuditRegister> {
        let dims: Vec<usize> = self.sites.iter().map(Site::dim).collect();
        let total: usize = dims.iter().product();
        let mut amps = vec![Complex64::default(); total];
        for (l, &a) in &self.terms {
            amps[crate::gates::encode(l, &dims)] += a;
        }
        QuditRegister::from_amplitudes(self.sites.clone(), amps)
    }

    pub fn from_dense(reg: &QuditRegister) -> Self {
        let dims = reg.dims();
        let terms = reg
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > PRUNE)
            .map(|(i, &a)| (decode(i, &dims), a))
            .collect();
        Self { sites: reg.sites().to_vec(), terms }
    }

    /// Largest `|self − other|` entry after aligning site order.
    pub fn max_difference(&self, other: &Self) -> Result<f64> {
        let keys = self.keys();
        let theirs = other.terms_in(&keys)?;
        let mut worst: f64 = 0.0;
        for (l, a) in &self.terms {
            worst = worst.max((a - theirs.get(l).copied().unwrap_or_default()).norm());
        }
        for (l, b) in &theirs {
            if !self.terms.contains_key(l) {
                worst = worst.max(b.norm());
            }
        }
        Ok(worst)
    }
}

impl Ket for SparseKet {
    fn group_of_site(&self, key: SiteKey) -> Result<Arc<FiniteGroup>> {
        Ok(self.sites[self.position(key)?].group.clone())
    }

    fn add_site(&mut self, key: SiteKey, group: Arc<FiniteGroup>, init: Init) -> Result<()> {
        if self.position(key).is_ok() {
            return Err(Error::Register(format!("site {key} already live")));
        }
        let d = group.order();
        let terms = std::mem::take(&mut self.terms);
        match init {
            Init::Identity => {
                for (mut l, a) in terms {
                    l.push(0);
                    self.terms.insert(l, a);
                }
            }
            Init::Plus => {
                let s = 1.0 / (d as f64).sqrt();
                for (l, a) in terms {
                    for x in 0..d {
                        let mut m = l.clone();
                        m.push(x);
                        self.terms.insert(m, a * s);
                    }
                }
            }
        }
        self.sites.push(Site { key, group });
        Ok(())
    }

    fn apply(&mut self, op: &LocalOperator, targets: &[SiteKey]) -> Result<()> {
        let dims = op.dims();
        if dims.len() != targets.len() {
            return Err(Error::Register(format!(
                "operator on {} sites applied to {} targets",
                dims.len(),
                targets.len()
            )));
        }
        let pos: Vec<usize> = targets.iter().map(|&k| self.position(k)).collect::<Result<_>>()?;
        for (i, (&p, &d)) in pos.iter().zip(dims).enumerate() {
            if self.sites[p].dim() != d || pos[..i].contains(&p) {
                return Err(Error::Register(format!("bad target {}", self.sites[p].key)));
            }
        }
        let local = |l: &[usize]| pos.iter().zip(dims).fold(0, |acc, (&p, &d)| acc * d + l[p]);
        let write = |l: &mut Vec<usize>, j: usize| {
            for (&p, x) in pos.iter().zip(decode(j, dims)) {
                l[p] = x;
            }
        };
        let terms = std::mem::take(&mut self.terms);
        match op.kind() {
            OpKind::Monomial { image, phase } => {
                for (mut l, a) in terms {
                    let j = local(&l);
                    write(&mut l, image[j]);
                    *self.terms.entry(l).or_default() += phase[j] * a;
                }
            }
            OpKind::Dense(m) => {
                let n = op.dim();
                for (l, a) in terms {
                    let j = local(&l);
                    for r in 0..n {
                        let x = m[r * n + j];
                        if x != Complex64::default() {
                            let mut k = l.clone();
                            write(&mut k, r);
                            *self.terms.entry(k).or_default() += x * a;
                        }
                    }
                }
            }
        }
        self.prune();
        Ok(())
    }

    fn contract(&mut self, key: SiteKey, weights: &[Complex64]) -> Result<()> {
        let p = self.position(key)?;
        if weights.len() != self.sites[p].dim() {
            return Err(Error::Register(format!("contraction vector of length {} on site {key}", weights.len())));
        }
        let terms = std::mem::take(&mut self.terms);
        for (mut l, a) in terms {
            let x = l.remove(p);
            if weights[x] != Complex64::default() {
                *self.terms.entry(l).or_default() += weights[x] * a;
            }
        }
        self.sites.remove(p);
        self.prune();
        Ok(())
    }

    fn split_site(
        &mut self,
        key: SiteKey,
        a: (SiteKey, Arc<FiniteGroup>),
        b: (SiteKey, Arc<FiniteGroup>),
        split: impl Fn(usize) -> (usize, usize),
    ) -> Result<()> {
        let p = self.position(key)?;
        if a.1.order() * b.1.order() != self.sites[p].dim() {
            return Err(Error::Register(format!("cannot split site {key}")));
        }
        let terms = std::mem::take(&mut self.terms);
        for (mut l, amp) in terms {
            let (i, j) = split(l[p]);
            l[p] = i;
            l.insert(p + 1, j);
            self.terms.insert(l, amp);
        }
        self.sites[p] = Site { key: a.0, group: a.1 };
        self.sites.insert(p + 1, Site { key: b.0, group: b.1 });
        Ok(())
    }

    fn merge_sites(
        &mut self,
        a: SiteKey,
        b: SiteKey,
        key: SiteKey,
        group: Arc<FiniteGroup>,
        merge: impl Fn(usize, usize) -> usize,
    ) -> Result<()> {
        let (pa, pb) = (self.position(a)?, self.position(b)?);
        if self.sites[pa].dim() * self.sites[pb].dim() != group.order() {
            return Err(Error::Register(format!("cannot merge {a}, {b} into a site of dimension {}", group.order())));
        }
        let terms = std::mem::take(&mut self.terms);
        for (mut l, amp) in terms {
            l[pa] = merge(l[pa], l[pb]);
            l.remove(pb);
            *self.terms.entry(l).or_default() += amp;
        }
        self.sites[pa] = Site { key, group };
        self.sites.remove(pb);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;
    use crate::groups::catalog;

    #[test]
    fn agrees_with_dense_register() {
        let g = Arc::new(catalog::symmetric(3));
        let sites: Vec<Site> = (0..2).map(|v| Site { key: SiteKey::vertex(v), group: g.clone() }).collect();
        let mut s = SparseKet::basis(sites, vec![2, 4]).unwrap();
        let mut d = s.to_dense().unwrap();
        let e = SiteKey::edge(0);
        Ket::add_site(&mut s, e, g.clone(), Init::Identity).unwrap();
        d.add_site(e, g.clone(), Init::Identity).unwrap();
        let cl = gates::controlled_left(&g).adjoint();
        let cr = gates::controlled_right(&g).adjoint();
        Ket::apply(&mut s, &cl, &[SiteKey::vertex(0), e]).unwrap();
        Ket::apply(&mut s, &cr, &[SiteKey::vertex(1), e]).unwrap();
        d.apply(&cl, &[SiteKey::vertex(0), e]).unwrap();
        d.apply(&cr, &[SiteKey::vertex(1), e]).unwrap();
        Ket::project_plus(&mut s, SiteKey::vertex(0)).unwrap();
        d.project_plus(SiteKey::vertex(0)).unwrap();
        assert!(s.max_difference(&SparseKet::from_dense(&d)).unwrap() < 1e-14);
        assert!(s.amplitude_in(&[SiteKey::vertex(1), e], &[4, g.ldiv(2, 4)]).unwrap().norm() > 0.1);
    }
}
