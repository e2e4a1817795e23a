//! Dense state vectors over heterogeneous group-algebra sites.
//!
//! Amplitudes are stored site-major with the last site fastest. Operators
//! are site-agnostic [`LocalOperator`]s bound to sites at application time.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::FiniteGroup;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Forced outcomes below this Born probability are rejected.
pub const MIN_PROBABILITY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Vertex,
    Edge,
    Plaquette,
}

/// Which factor of a split `ℂ[N] ⊗ ℂ[Q]` site a key refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Whole,
    Normal,
    Quotient,
}

/// Identifies a site by cell role and index, protocol round and split part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SiteKey {
    pub role: Role,
    pub index: usize,
    pub round: u8,
    pub part: Part,
}

impl SiteKey {
    pub fn vertex(index: usize) -> Self {
        Self { role: Role::Vertex, index, round: 0, part: Part::Whole }
    }

    pub fn edge(index: usize) -> Self {
        Self { role: Role::Edge, index, round: 0, part: Part::Whole }
    }

    pub fn plaquette(index: usize) -> Self {
        Self { role: Role::Plaquette, index, round: 0, part: Part::Whole }
    }

    pub fn at_round(self, round: u8) -> Self {
        Self { round, ..self }
    }

    pub fn with_part(self, part: Part) -> Self {
        Self { part, ..self }
    }
}

impl std::str::FromStr for SiteKey {
    type Err = Error;

    /// Parses the display form, e.g. `v3`, `e2@1.N`, `p0`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad site key '{s}'"));
        let mut chars = s.chars();
        let mut key = match chars.next() {
            Some('v') => SiteKey::vertex(0),
            Some('e') => SiteKey::edge(0),
            Some('p') => SiteKey::plaquette(0),
            _ => return Err(bad()),
        };
        let rest = chars.as_str();
        let (rest, part) = match rest.split_once('.') {
            Some((r, "N")) => (r, Part::Normal),
            Some((r, "Q")) => (r, Part::Quotient),
            Some(_) => return Err(bad()),
            None => (rest, Part::Whole),
        };
        let (idx, round) = match rest.split_once('@') {
            Some((i, r)) => (i, r.parse().map_err(|_| bad())?),
            None => (rest, 0),
        };
        key.index = idx.parse().map_err(|_| bad())?;
        Ok(key.at_round(round).with_part(part))
    }
}

impl From<SiteKey> for String {
    fn from(k: SiteKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for SiteKey {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for SiteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = match self.role {
            Role::Vertex => 'v',
            Role::Edge => 'e',
            Role::Plaquette => 'p',
        };
        write!(f, "{r}{}", self.index)?;
        if self.round > 0 {
            write!(f, "@{}", self.round)?;
        }
        match self.part {
            Part::Whole => Ok(()),
            Part::Normal => write!(f, ".N"),
            Part::Quotient => write!(f, ".Q"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum OpKind {
    /// Row-major `D × D` matrix.
    Dense(Vec<Complex64>),
    /// `|j⟩ ↦ phase[j] |image[j]⟩`; diagonal when `image` is the identity.
    Monomial { image: Vec<usize>, phase: Vec<Complex64> },
}

/// An operator on a tuple of sites with the given dimensions. Local index
/// of `(x_1, …, x_m)` is mixed radix with the last target fastest.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    dims: Vec<usize>,
    kind: OpKind,
}

impl LocalOperator {
    pub fn dense(dims: Vec<usize>, matrix: Vec<Complex64>) -> Self {
        let d: usize = dims.iter().product();
        assert_eq!(matrix.len(), d * d, "dense operator size");
        Self { dims, kind: OpKind::Dense(matrix) }
    }

    pub fn monomial(dims: Vec<usize>, image: Vec<usize>, phase: Vec<Complex64>) -> Self {
        let d: usize = dims.iter().product();
        assert!(image.len() == d && phase.len() == d, "monomial operator size");
        assert!(image.iter().all(|&i| i < d));
        Self { dims, kind: OpKind::Monomial { image, phase } }
    }

    pub fn permutation(dims: Vec<usize>, image: Vec<usize>) -> Self {
        let d = image.len();
        Self::monomial(dims, image, vec![ONE; d])
    }

    pub fn diagonal(dims: Vec<usize>, phase: Vec<Complex64>) -> Self {
        let image = (0..phase.len()).collect();
        Self::monomial(dims, image, phase)
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self::permutation(dims, (0..d).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn kind(&self) -> &OpKind {
        &self.kind
    }

    pub fn is_monomial(&self) -> bool {
        matches!(self.kind, OpKind::Monomial { .. })
    }

    pub fn is_diagonal(&self) -> bool {
        match &self.kind {
            OpKind::Monomial { image, .. } => image.iter().enumerate().all(|(i, &j)| i == j),
            OpKind::Dense(m) => {
                let d = self.dim();
                (0..d).all(|r| (0..d).all(|c| r == c || m[r * d + c] == ZERO))
            }
        }
    }

    /// Row-major dense matrix.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let d = self.dim();
        match &self.kind {
            OpKind::Dense(m) => m.clone(),
            OpKind::Monomial { image, phase } => {
                let mut m = vec![ZERO; d * d];
                for j in 0..d {
                    m[image[j] * d + j] += phase[j];
                }
                m
            }
        }
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        match &self.kind {
            OpKind::Dense(m) => {
                let mut t = vec![ZERO; d * d];
                for r in 0..d {
                    for c in 0..d {
                        t[c * d + r] = m[r * d + c].conj();
                    }
                }
                Self::dense(self.dims.clone(), t)
            }
            OpKind::Monomial { image, phase } => {
                if let Some(inv) = invert_image(image) {
                    let ph = inv.iter().map(|&j| phase[j].conj()).collect();
                    Self::monomial(self.dims.clone(), inv, ph)
                } else {
                    Self::dense(self.dims.clone(), self.to_dense()).adjoint()
                }
            }
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims, "composed operators act on different spaces");
        let d = self.dim();
        match (&self.kind, &other.kind) {
            (OpKind::Monomial { image: a, phase: pa }, OpKind::Monomial { image: b, phase: pb }) => {
                let image = (0..d).map(|j| a[b[j]]).collect();
                let phase = (0..d).map(|j| pa[b[j]] * pb[j]).collect();
                Self::monomial(self.dims.clone(), image, phase)
            }
            _ => {
                let (a, b) = (self.to_dense(), other.to_dense());
                let mut m = vec![ZERO; d * d];
                for r in 0..d {
                    for k in 0..d {
                        let x = a[r * d + k];
                        if x == ZERO {
                            continue;
                        }
                        for c in 0..d {
                            m[r * d + c] += x * b[k * d + c];
                        }
                    }
                }
                Self::dense(self.dims.clone(), m)
            }
        }
    }

    /// `self ⊗ other` with `other`'s targets appended.
    pub fn tensor(&self, other: &Self) -> Self {
        let (da, db) = (self.dim(), other.dim());
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        match (&self.kind, &other.kind) {
            (OpKind::Monomial { image: a, phase: pa }, OpKind::Monomial { image: b, phase: pb }) => {
                let mut image = Vec::with_capacity(da * db);
                let mut phase = Vec::with_capacity(da * db);
                for i in 0..da {
                    for j in 0..db {
                        image.push(a[i] * db + b[j]);
                        phase.push(pa[i] * pb[j]);
                    }
                }
                Self::monomial(dims, image, phase)
            }
            _ => {
                let (a, b) = (self.to_dense(), other.to_dense());
                let d = da * db;
                let mut m = vec![ZERO; d * d];
                for r1 in 0..da {
                    for c1 in 0..da {
                        let x = a[r1 * da + c1];
                        if x == ZERO {
                            continue;
                        }
                        for r2 in 0..db {
                            for c2 in 0..db {
                                m[(r1 * db + r2) * d + c1 * db + c2] = x * b[r2 * db + c2];
                            }
                        }
                    }
                }
                Self::dense(dims, m)
            }
        }
    }

    /// `max |(U†U − 1)_{ij}|`
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        match &self.kind {
            OpKind::Monomial { image, phase } => {
                if invert_image(image).is_none() {
                    return 1.0;
                }
                phase.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max)
            }
            OpKind::Dense(m) => {
                let mut worst: f64 = 0.0;
                for r in 0..d {
                    for c in 0..d {
                        let mut s = ZERO;
                        for k in 0..d {
                            s += m[k * d + r].conj() * m[k * d + c];
                        }
                        let want = if r == c { ONE } else { ZERO };
                        worst = worst.max((s - want).norm());
                    }
                }
                worst
            }
        }
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_defect() < 1e-12
    }

    /// `max |A_{ij} − B_{ij}|`
    pub fn max_deviation(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims);
        if let (OpKind::Monomial { image: a, phase: pa }, OpKind::Monomial { image: b, phase: pb }) =
            (&self.kind, &other.kind)
        {
            return (0..a.len())
                .map(|j| if a[j] == b[j] { (pa[j] - pb[j]).norm() } else { pa[j].norm().max(pb[j].norm()) })
                .fold(0.0, f64::max);
        }
        self.to_dense().iter().zip(other.to_dense()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

fn invert_image(image: &[usize]) -> Option<Vec<usize>> {
    let mut inv = vec![usize::MAX; image.len()];
    for (j, &i) in image.iter().enumerate() {
        if inv[i] != usize::MAX {
            return None;
        }
        inv[i] = j;
    }
    Some(inv)
}

#[derive(Clone, Debug)]
pub struct Site {
    pub key: SiteKey,
    pub group: Arc<FiniteGroup>,
}

impl Site {
    pub fn dim(&self) -> usize {
        self.group.order()
    }
}

/// Initial single-site state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform superposition, unit norm.
    Plus,
    /// The basis state at the identity.
    Identity,
}

/// How to resolve a measurement.
pub enum Choice<'a> {
    Sample(&'a mut ChaCha8Rng),
    Forced(usize),
}

/// The result of one single-site measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub outcome: usize,
    pub probability: f64,
}

#[derive(Clone, Debug)]
pub struct QuditRegister {
    sites: Vec<Site>,
    amps: Vec<Complex64>,
    retired: Vec<SiteKey>,
}

fn single(init: Init, d: usize) -> Vec<Complex64> {
    match init {
        Init::Plus => vec![Complex64::new(1.0 / (d as f64).sqrt(), 0.0); d],
        Init::Identity => {
            let mut v = vec![ZERO; d];
            v[0] = ONE;
            v
        }
    }
}

impl QuditRegister {
    /// The empty register: one amplitude, no sites.
    pub fn empty() -> Self {
        Self { sites: Vec::new(), amps: vec![ONE], retired: Vec::new() }
    }

    pub fn product(sites: impl IntoIterator<Item = (SiteKey, Arc<FiniteGroup>, Init)>) -> Result<Self> {
        let mut r = Self::empty();
        for (key, group, init) in sites {
            r.add_site(key, group, init)?;
        }
        Ok(r)
    }

    pub fn init_plus(sites: impl IntoIterator<Item = (SiteKey, Arc<FiniteGroup>)>) -> Result<Self> {
        Self::product(sites.into_iter().map(|(k, g)| (k, g, Init::Plus)))
    }

    pub fn init_identity(sites: impl IntoIterator<Item = (SiteKey, Arc<FiniteGroup>)>) -> Result<Self> {
        Self::product(sites.into_iter().map(|(k, g)| (k, g, Init::Identity)))
    }

    pub fn from_amplitudes(sites: Vec<Site>, amps: Vec<Complex64>) -> Result<Self> {
        let d: usize = sites.iter().map(Site::dim).product();
        if d != amps.len() {
            return Err(Error::Register(format!("{} amplitudes for dimension {d}", amps.len())));
        }
        let r = Self { sites, amps, retired: Vec::new() };
        r.check_unique()?;
        Ok(r)
    }

    fn check_unique(&self) -> Result<()> {
        let mut keys: Vec<SiteKey> = self.sites.iter().map(|s| s.key).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Register("duplicate site key".into()));
        }
        Ok(())
    }

    /// Tensors a fresh site onto the end of the register.
    pub fn add_site(&mut self, key: SiteKey, group: Arc<FiniteGroup>, init: Init) -> Result<()> {
        let v = single(init, group.order());
        self.add_site_state(key, group, &v)
    }

    pub fn add_site_state(&mut self, key: SiteKey, group: Arc<FiniteGroup>, v: &[Complex64]) -> Result<()> {
        if self.position(key).is_ok() {
            return Err(Error::Register(format!("site {key} already live")));
        }
        let d = group.order();
        if v.len() != d {
            return Err(Error::Register(format!("state of length {} for site {key} of dimension {d}", v.len())));
        }
        let mut amps = Vec::with_capacity(self.amps.len() * d);
        for &a in &self.amps {
            amps.extend(v.iter().map(|&x| a * x));
        }
        self.amps = amps;
        self.sites.push(Site { key, group });
        self.retired.retain(|k| *k != key);
        Ok(())
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn keys(&self) -> Vec<SiteKey> {
        self.sites.iter().map(|s| s.key).collect()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn retired(&self) -> &[SiteKey] {
        &self.retired
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sites.iter().map(Site::dim).collect()
    }

    pub fn position(&self, key: SiteKey) -> Result<usize> {
        self.sites.iter().position(|s| s.key == key).ok_or_else(|| {
            if self.retired.contains(&key) {
                Error::Register(format!("site {key} has been retired"))
            } else {
                Error::Register(format!("no site {key}"))
            }
        })
    }

    pub fn group_of(&self, key: SiteKey) -> Result<&Arc<FiniteGroup>> {
        Ok(&self.sites[self.position(key)?].group)
    }

    fn stride(&self, pos: usize) -> usize {
        self.sites[pos + 1..].iter().map(Site::dim).product()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let s = 1.0 / n;
            self.amps.iter_mut().for_each(|a| *a *= s);
        }
        n
    }

    pub fn scale(&mut self, s: Complex64) {
        self.amps.iter_mut().for_each(|a| *a *= s);
    }

    /// Base indices (all target coordinates zero) and per-local-index offsets.
    fn plan(&self, positions: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let strides: Vec<usize> = (0..self.sites.len()).map(|p| self.stride(p)).collect();
        let mut offsets = vec![0usize];
        for &p in positions {
            let d = self.sites[p].dim();
            let mut next = Vec::with_capacity(offsets.len() * d);
            for &o in &offsets {
                for x in 0..d {
                    next.push(o + x * strides[p]);
                }
            }
            offsets = next;
        }
        let mut bases = vec![0usize];
        for p in 0..self.sites.len() {
            if positions.contains(&p) {
                continue;
            }
            let d = self.sites[p].dim();
            let mut next = Vec::with_capacity(bases.len() * d);
            for &b in &bases {
                for x in 0..d {
                    next.push(b + x * strides[p]);
                }
            }
            bases = next;
        }
        (bases, offsets)
    }

    fn positions(&self, targets: &[SiteKey], dims: &[usize]) -> Result<Vec<usize>> {
        if targets.len() != dims.len() {
            return Err(Error::Register(format!(
                "operator on {} sites applied to {} targets",
                dims.len(),
                targets.len()
            )));
        }
        let mut pos = Vec::with_capacity(targets.len());
        for (&k, &d) in targets.iter().zip(dims) {
            let p = self.position(k)?;
            if self.sites[p].dim() != d {
                return Err(Error::Register(format!(
                    "site {k} has dimension {} but operator expects {d}",
                    self.sites[p].dim()
                )));
            }
            if pos.contains(&p) {
                return Err(Error::Register(format!("site {k} targeted twice")));
            }
            pos.push(p);
        }
        Ok(pos)
    }

    /// Applies `op` with its local factors bound to `targets` in order.
    pub fn apply(&mut self, op: &LocalOperator, targets: &[SiteKey]) -> Result<()> {
        let pos = self.positions(targets, op.dims())?;
        let (bases, offsets) = self.plan(&pos);
        let d = offsets.len();
        let amps = &mut self.amps;
        match op.kind() {
            OpKind::Monomial { image, phase } if image.iter().enumerate().all(|(i, &j)| i == j) => {
                for &b in &bases {
                    for (j, &o) in offsets.iter().enumerate() {
                        amps[b + o] *= phase[j];
                    }
                }
            }
            OpKind::Monomial { image, phase } => {
                let mut buf = vec![ZERO; d];
                for &b in &bases {
                    buf.iter_mut().for_each(|x| *x = ZERO);
                    for j in 0..d {
                        buf[image[j]] += phase[j] * amps[b + offsets[j]];
                    }
                    for (j, &o) in offsets.iter().enumerate() {
                        amps[b + o] = buf[j];
                    }
                }
            }
            OpKind::Dense(m) => {
                let mut v = vec![ZERO; d];
                for &b in &bases {
                    for (j, &o) in offsets.iter().enumerate() {
                        v[j] = amps[b + o];
                    }
                    for r in 0..d {
                        let row = &m[r * d..(r + 1) * d];
                        let mut s = ZERO;
                        for (x, y) in row.iter().zip(&v) {
                            s += x * y;
                        }
                        amps[b + offsets[r]] = s;
                    }
                }
            }
        }
        Ok(())
    }

    /// `⟨ψ|Op|ψ⟩ / ⟨ψ|ψ⟩`
    pub fn expectation(&self, op: &LocalOperator, targets: &[SiteKey]) -> Result<Complex64> {
        let mut other = self.clone();
        other.apply(op, targets)?;
        let ip: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(ip / self.norm_sqr())
    }

    /// Replaces the site with the contraction `Σ_b w_b ψ(…, b, …)`.
    pub fn contract(&mut self, key: SiteKey, weights: &[Complex64]) -> Result<()> {
        let pos = self.position(key)?;
        let d = self.sites[pos].dim();
        if weights.len() != d {
            return Err(Error::Register(format!("contraction vector of length {} on site {key}", weights.len())));
        }
        let stride = self.stride(pos);
        let outer = self.amps.len() / (d * stride);
        let mut out = vec![ZERO; outer * stride];
        for o in 0..outer {
            for (b, &w) in weights.iter().enumerate() {
                if w == ZERO {
                    continue;
                }
                let src = &self.amps[(o * d + b) * stride..(o * d + b + 1) * stride];
                let dst = &mut out[o * stride..(o + 1) * stride];
                for (x, y) in dst.iter_mut().zip(src) {
                    *x += w * y;
                }
            }
        }
        self.amps = out;
        self.sites.remove(pos);
        self.retired.push(key);
        Ok(())
    }

    /// Contracts with `⟨+|` (unit norm) and retires the site, without
    /// renormalizing.
    pub fn project_plus(&mut self, key: SiteKey) -> Result<()> {
        let d = self.group_of(key)?.order();
        let w = vec![Complex64::new(1.0 / (d as f64).sqrt(), 0.0); d];
        self.contract(key, &w)
    }

    /// Contraction weights `χ^a(b)/√|A|` of the bra `⟨+| Z^a` for outcome `a`.
    pub fn fourier_bra(group: &FiniteGroup, a: usize) -> Result<Vec<Complex64>> {
        let p = group.require_pairing()?;
        let s = 1.0 / (group.order() as f64).sqrt();
        Ok(group.elements().map(|b| p.chi(a, b) * s).collect())
    }

    /// Born probabilities of every Fourier-basis outcome on `key`.
    pub fn fourier_probabilities(&self, key: SiteKey) -> Result<Vec<f64>> {
        let pos = self.position(key)?;
        let g = self.sites[pos].group.clone();
        let d = g.order();
        let bras: Vec<Vec<Complex64>> = g.elements().map(|a| Self::fourier_bra(&g, a)).collect::<Result<_>>()?;
        let stride = self.stride(pos);
        let outer = self.amps.len() / (d * stride);
        let mut probs = vec![0.0; d];
        let mut acc = vec![ZERO; stride];
        for (a, bra) in bras.iter().enumerate() {
            for o in 0..outer {
                acc.iter_mut().for_each(|x| *x = ZERO);
                for (b, &w) in bra.iter().enumerate() {
                    let src = &self.amps[(o * d + b) * stride..(o * d + b + 1) * stride];
                    for (x, y) in acc.iter_mut().zip(src) {
                        *x += w * y;
                    }
                }
                probs[a] += acc.iter().map(Complex64::norm_sqr).sum::<f64>();
            }
        }
        let total = self.norm_sqr();
        if total > 0.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        Ok(probs)
    }

    /// Measures `key` in the character basis, retires it and renormalizes.
    pub fn measure_fourier(&mut self, key: SiteKey, choice: Choice<'_>) -> Result<Measurement> {
        let g = self.group_of(key)?.clone();
        let probs = self.fourier_probabilities(key)?;
        let outcome = match choice {
            Choice::Forced(a) => {
                if a >= g.order() {
                    return Err(Error::Register(format!("outcome {a} out of range on {key}")));
                }
                if probs[a] < MIN_PROBABILITY {
                    return Err(Error::ZeroProbability { site: key.to_string(), outcome: a, probability: probs[a] });
                }
                a
            }
            Choice::Sample(rng) => {
                let u: f64 = rng.gen::<f64>();
                let mut acc = 0.0;
                let mut pick = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                for (a, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = a;
                        break;
                    }
                }
                pick
            }
        };
        let bra = Self::fourier_bra(&g, outcome)?;
        self.contract(key, &bra)?;
        self.normalize();
        Ok(Measurement { outcome, probability: probs[outcome] })
    }

    /// Moves sites into the order of `keys` (a permutation of the live keys).
    pub fn reorder(&mut self, keys: &[SiteKey]) -> Result<()> {
        if keys.len() != self.sites.len() {
            return Err(Error::LayoutMismatch(format!("{} keys for {} sites", keys.len(), self.sites.len())));
        }
        let perm: Vec<usize> = keys.iter().map(|&k| self.position(k)).collect::<Result<_>>()?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(());
        }
        let old_strides: Vec<usize> = (0..self.sites.len()).map(|p| self.stride(p)).collect();
        let new_sites: Vec<Site> = perm.iter().map(|&p| self.sites[p].clone()).collect();
        let dims: Vec<usize> = new_sites.iter().map(Site::dim).collect();
        let mut out = vec![ZERO; self.amps.len()];
        let mut idx = vec![0usize; dims.len()];
        for slot in out.iter_mut() {
            let src: usize = idx.iter().zip(&perm).map(|(&x, &p)| x * old_strides[p]).sum();
            *slot = self.amps[src];
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        self.amps = out;
        self.sites = new_sites;
        Ok(())
    }

    /// Replaces site `key` by two sites `(a_key, b_key)` via the bijection
    /// `x ↦ (split(x) / |B|, split(x) % |B|)`. A pure relabeling.
    pub fn split_site(
        &mut self,
        key: SiteKey,
        a: (SiteKey, Arc<FiniteGroup>),
        b: (SiteKey, Arc<FiniteGroup>),
        split: impl Fn(usize) -> (usize, usize),
    ) -> Result<()> {
        let pos = self.position(key)?;
        let d = self.sites[pos].dim();
        let (da, db) = (a.1.order(), b.1.order());
        if da * db != d {
            return Err(Error::Register(format!("cannot split site {key} of dimension {d} into {da}×{db}")));
        }
        let stride = self.stride(pos);
        let outer = self.amps.len() / (d * stride);
        let mut out = vec![ZERO; self.amps.len()];
        for x in 0..d {
            let (i, j) = split(x);
            let y = i * db + j;
            for o in 0..outer {
                out[(o * d + y) * stride..(o * d + y + 1) * stride]
                    .copy_from_slice(&self.amps[(o * d + x) * stride..(o * d + x + 1) * stride]);
            }
        }
        self.amps = out;
        self.sites.remove(pos);
        self.sites.insert(pos, Site { key: b.0, group: b.1 });
        self.sites.insert(pos, Site { key: a.0, group: a.1 });
        self.check_unique()
    }

    /// Merges two sites into one site `key` over `group` via
    /// `(i, j) ↦ merge(i, j)`. A pure relabeling.
    pub fn merge_sites(
        &mut self,
        a: SiteKey,
        b: SiteKey,
        key: SiteKey,
        group: Arc<FiniteGroup>,
        merge: impl Fn(usize, usize) -> usize,
    ) -> Result<()> {
        let (pa, pb) = (self.position(a)?, self.position(b)?);
        let (da, db) = (self.sites[pa].dim(), self.sites[pb].dim());
        if da * db != group.order() {
            return Err(Error::Register(format!("cannot merge {a}, {b} into a site of dimension {}", group.order())));
        }
        // bring b right after a
        let mut order: Vec<SiteKey> = self.keys().into_iter().filter(|&k| k != b).collect();
        let ia = order.iter().position(|&k| k == a).unwrap();
        order.insert(ia + 1, b);
        self.reorder(&order)?;
        let pos = ia;
        let d = da * db;
        let stride = self.stride(pos + 1);
        let outer = self.amps.len() / (d * stride);
        let mut out = vec![ZERO; self.amps.len()];
        for i in 0..da {
            for j in 0..db {
                let x = i * db + j;
                let y = merge(i, j);
                for o in 0..outer {
                    out[(o * d + y) * stride..(o * d + y + 1) * stride]
                        .copy_from_slice(&self.amps[(o * d + x) * stride..(o * d + x + 1) * stride]);
                }
            }
        }
        self.amps = out;
        self.sites.remove(pos);
        self.sites[pos] = Site { key, group };
        self.check_unique()
    }

    /// `⟨a|b⟩` after aligning `b`'s site order with `a`'s.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        let aligned;
        let other = if self.keys() == other.keys() {
            other
        } else {
            let mut o = other.clone();
            o.reorder(&self.keys())
                .map_err(|_| Error::LayoutMismatch(format!("live sites {:?} vs {:?}", self.keys(), other.keys())))?;
            aligned = o;
            &aligned
        };
        if self.dims() != other.dims() {
            return Err(Error::LayoutMismatch("site dimensions differ".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩)`
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ip = self.inner_product(other)?;
        let n = self.norm_sqr() * other.norm_sqr();
        if n == 0.0 {
            return Ok(0.0);
        }
        Ok((ip.norm_sqr() / n).min(1.0))
    }

    /// Basis labels of every amplitude above `1e-14`, with real and imaginary parts.
    pub fn dump(&self) -> Vec<(Vec<usize>, f64, f64)> {
        let dims = self.dims();
        let mut out = Vec::new();
        let mut idx = vec![0usize; dims.len()];
        for a in &self.amps {
            if a.norm() >= 1e-14 {
                out.push((idx.clone(), a.re, a.im));
            }
            for k in (0..dims.len()).rev() {
                idx[k] += 1;
                if idx[k] < dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    pub fn dump_json(&self) -> String {
        serde_json::to_string(&self.dump()).expect("serializable")
    }

    /// Amplitudes as a map from basis labels, for small-state comparisons.
    pub fn as_map(&self) -> BTreeMap<Vec<usize>, Complex64> {
        self.dump().into_iter().map(|(k, re, im)| (k, Complex64::new(re, im))).collect()
    }
}

/// State operations shared by [`QuditRegister`] and the sparse basis
/// expansion used for exact operator checks.
pub trait Ket {
    fn group_of_site(&self, key: SiteKey) -> Result<Arc<FiniteGroup>>;
    fn add_site(&mut self, key: SiteKey, group: Arc<FiniteGroup>, init: Init) -> Result<()>;
    fn apply(&mut self, op: &LocalOperator, targets: &[SiteKey]) -> Result<()>;
    /// `Σ_b w_b ψ(…, b, …)`, retiring the site.
    fn contract(&mut self, key: SiteKey, weights: &[Complex64]) -> Result<()>;
    fn split_site(
        &mut self,
        key: SiteKey,
        a: (SiteKey, Arc<FiniteGroup>),
        b: (SiteKey, Arc<FiniteGroup>),
        split: impl Fn(usize) -> (usize, usize),
    ) -> Result<()>;
    fn merge_sites(
        &mut self,
        a: SiteKey,
        b: SiteKey,
        key: SiteKey,
        group: Arc<FiniteGroup>,
        merge: impl Fn(usize, usize) -> usize,
    ) -> Result<()>;

    fn project_plus(&mut self, key: SiteKey) -> Result<()> {
        let d = self.group_of_site(key)?.order();
        let w = vec![Complex64::new(1.0 / (d as f64).sqrt(), 0.0); d];
        self.contract(key, &w)
    }
}

impl Ket for QuditRegister {
    fn group_of_site(&self, key: SiteKey) -> Result<Arc<FiniteGroup>> {
        self.group_of(key).cloned()
    }

    fn add_site(&mut self, key: SiteKey, group: Arc<FiniteGroup>, init: Init) -> Result<()> {
        QuditRegister::add_site(self, key, group, init)
    }

    fn apply(&mut self, op: &LocalOperator, targets: &[SiteKey]) -> Result<()> {
        QuditRegister::apply(self, op, targets)
    }

    fn contract(&mut self, key: SiteKey, weights: &[Complex64]) -> Result<()> {
        QuditRegister::contract(self, key, weights)
    }

    fn split_site(
        &mut self,
        key: SiteKey,
        a: (SiteKey, Arc<FiniteGroup>),
        b: (SiteKey, Arc<FiniteGroup>),
        split: impl Fn(usize) -> (usize, usize),
    ) -> Result<()> {
        QuditRegister::split_site(self, key, a, b, split)
    }

    fn merge_sites(
        &mut self,
        a: SiteKey,
        b: SiteKey,
        key: SiteKey,
        group: Arc<FiniteGroup>,
        merge: impl Fn(usize, usize) -> usize,
    ) -> Result<()> {
        QuditRegister::merge_sites(self, a, b, key, group, merge)
    }

    fn project_plus(&mut self, key: SiteKey) -> Result<()> {
        QuditRegister::project_plus(self, key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{build_cyclic, catalog};
    use rand::SeedableRng;

    fn z(n: usize) -> Arc<FiniteGroup> {
        Arc::new(build_cyclic(n).unwrap())
    }

    #[test]
    fn init_states() {
        let r = QuditRegister::init_plus([(SiteKey::vertex(0), z(2))]).unwrap();
        for a in r.amplitudes() {
            assert!((a.re - 0.5f64.sqrt()).abs() < 1e-15);
        }
        let s3 = Arc::new(catalog::symmetric(3));
        let r = QuditRegister::init_identity([(SiteKey::vertex(0), s3)]).unwrap();
        assert_eq!(r.amplitudes()[0], ONE);
        assert!((r.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn measurement_probabilities() {
        let r = QuditRegister::init_plus([(SiteKey::vertex(0), z(2))]).unwrap();
        let p = r.fourier_probabilities(SiteKey::vertex(0)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        let mut r2 = r.clone();
        assert!(matches!(
            r2.measure_fourier(SiteKey::vertex(0), Choice::Forced(1)),
            Err(Error::ZeroProbability { .. })
        ));
        let r = QuditRegister::init_identity([(SiteKey::vertex(0), z(2))]).unwrap();
        let p = r.fourier_probabilities(SiteKey::vertex(0)).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut r = r;
        let m = r.measure_fourier(SiteKey::vertex(0), Choice::Sample(&mut rng)).unwrap();
        assert!(m.outcome < 2);
        assert!(r.sites().is_empty());
        assert!(r.position(SiteKey::vertex(0)).is_err());
    }

    #[test]
    fn left_multiplication_kernel() {
        let s3 = Arc::new(catalog::symmetric(3));
        for g in s3.elements() {
            for h in s3.elements() {
                let mut r = QuditRegister::init_identity([(SiteKey::edge(0), s3.clone())]).unwrap();
                let to_h = LocalOperator::permutation(vec![6], (0..6).map(|x| s3.mul(h, x)).collect());
                r.apply(&to_h, &[SiteKey::edge(0)]).unwrap();
                let lg = LocalOperator::permutation(vec![6], (0..6).map(|x| s3.mul(g, x)).collect());
                r.apply(&lg, &[SiteKey::edge(0)]).unwrap();
                assert_eq!(r.amplitudes()[s3.mul(g, h)], ONE);
            }
        }
    }

    #[test]
    fn split_merge_round_trip() {
        let z6 = z(6);
        let (z2, z3) = (z(2), z(3));
        let mut r = QuditRegister::from_amplitudes(
            vec![
                Site { key: SiteKey::vertex(0), group: z6.clone() },
                Site { key: SiteKey::vertex(1), group: z2.clone() },
            ],
            (0..12).map(|k| Complex64::new(k as f64, 0.5)).collect(),
        )
        .unwrap();
        let orig = r.clone();
        let n = SiteKey::vertex(0).with_part(Part::Normal);
        let q = SiteKey::vertex(0).with_part(Part::Quotient);
        r.split_site(SiteKey::vertex(0), (n, z2.clone()), (q, z3.clone()), |x| (x % 2, x / 2)).unwrap();
        assert_eq!(r.sites().len(), 3);
        r.merge_sites(n, q, SiteKey::vertex(0), z6, |i, j| 2 * j + i).unwrap();
        assert_eq!(r.keys(), orig.keys());
        assert_eq!(r.amplitudes(), orig.amplitudes());
    }
}
