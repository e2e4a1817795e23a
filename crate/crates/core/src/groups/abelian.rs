use std::f64::consts::PI;

use num_complex::Complex64;

use super::FiniteGroup;

/// Canonical identification of an abelian group with its character group.
///
/// The group is decomposed as `Z_{n1} × … × Z_{nk}` with generators chosen
/// greedily (largest order first, lowest index first); with coordinates
/// `a = Σ x_i g_i` the pairing is `χ^a(b) = exp(2πi Σ x_i y_i / n_i)`. For
/// `Z_n` this is `exp(2πi a b / n)`.
#[derive(Clone, Debug)]
pub struct AbelianPairing {
    orders: Vec<usize>,
    generators: Vec<usize>,
    coords: Vec<Vec<usize>>,
    /// `lcm` of the factor orders; phases are stored as multiples of `2π/lcm`.
    lcm: usize,
    /// `phase[a * |A| + b]` in units of `2π/lcm`.
    phase: Vec<usize>,
    order: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl AbelianPairing {
    pub(crate) fn new(g: &FiniteGroup) -> Option<Self> {
        if !g.is_abelian() {
            return None;
        }
        let n = g.order();
        let mut by_order: Vec<usize> = g.elements().collect();
        by_order.sort_by_key(|&x| (std::cmp::Reverse(g.element_order(x)), x));
        let (generators, orders) = decompose(g, &by_order, vec![0], Vec::new(), Vec::new())?;
        let mut coords = vec![Vec::new(); n];
        // enumerate Σ x_i g_i in mixed radix
        let total: usize = orders.iter().product();
        debug_assert_eq!(total, n);
        for idx in 0..total {
            let mut rem = idx;
            let mut x = vec![0; orders.len()];
            for (i, &o) in orders.iter().enumerate().rev() {
                x[i] = rem % o;
                rem /= o;
            }
            let mut elem = 0;
            for (i, &xi) in x.iter().enumerate() {
                for _ in 0..xi {
                    elem = g.mul(elem, generators[i]);
                }
            }
            coords[elem] = x;
        }
        let lcm = orders.iter().fold(1, |acc, &o| acc / gcd(acc, o) * o);
        let mut phase = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mut k = 0;
                for (i, &o) in orders.iter().enumerate() {
                    k += coords[a][i] * coords[b][i] * (lcm / o);
                }
                phase[a * n + b] = k % lcm;
            }
        }
        Some(Self { orders, generators, coords, lcm, phase, order: n })
    }

    pub fn factor_orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn coordinates(&self, a: usize) -> &[usize] {
        &self.coords[a]
    }

    /// `χ^a(b)`.
    pub fn chi(&self, a: usize, b: usize) -> Complex64 {
        let k = self.phase[a * self.order + b];
        // exact values at quarter turns
        match (4 * k) % self.lcm == 0 {
            true if k == 0 => return Complex64::new(1.0, 0.0),
            true if 4 * k == self.lcm => return Complex64::new(0.0, 1.0),
            true if 2 * k == self.lcm => return Complex64::new(-1.0, 0.0),
            true => return Complex64::new(0.0, -1.0),
            false => {}
        }
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / self.lcm as f64)
    }
}

/// Backtracking search for generators whose cyclic groups form an internal
/// direct product covering the group.
fn decompose(
    g: &FiniteGroup,
    candidates: &[usize],
    span: Vec<usize>,
    gens: Vec<usize>,
    orders: Vec<usize>,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if span.len() == g.order() {
        return Some((gens, orders));
    }
    let mut in_span = vec![false; g.order()];
    for &s in &span {
        in_span[s] = true;
    }
    for &c in candidates {
        if in_span[c] {
            continue;
        }
        let o = g.element_order(c);
        // ⟨c⟩ ∩ span must be trivial
        let mut x = c;
        let mut ok = true;
        for _ in 1..o {
            if in_span[x] {
                ok = false;
                break;
            }
            x = g.mul(x, c);
        }
        if !ok {
            continue;
        }
        let mut next = Vec::with_capacity(span.len() * o);
        let mut p = 0;
        for _ in 0..o {
            for &s in &span {
                next.push(g.mul(s, p));
            }
            p = g.mul(p, c);
        }
        let mut gens2 = gens.clone();
        gens2.push(c);
        let mut orders2 = orders.clone();
        orders2.push(o);
        if let Some(found) = decompose(g, candidates, next, gens2, orders2) {
            return Some(found);
        }
    }
    None
}
