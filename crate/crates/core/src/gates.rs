//! Constructors for the group-algebra gates.
//!
//! Multi-site operators index their local basis in mixed radix with the
//! last target fastest, matching [`LocalOperator`].

use num_complex::Complex64;

use crate::cellulation::{Cellulation, Orientation};
use crate::error::{Error, Result};
use crate::groups::{FactorSystem, FiniteGroup, Irrep};
use crate::register::LocalOperator;
#[cfg(test)]
use crate::register::OpKind;

pub fn decode(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut cfg = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        cfg[k] = idx % dims[k];
        idx /= dims[k];
    }
    cfg
}

pub fn encode(cfg: &[usize], dims: &[usize]) -> usize {
    cfg.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// The permutation `|x⟩ ↦ |f(x)⟩` on configurations.
pub fn permutation_from_fn(dims: Vec<usize>, f: impl Fn(&[usize]) -> Vec<usize>) -> LocalOperator {
    let d: usize = dims.iter().product();
    let image = (0..d).map(|j| encode(&f(&decode(j, &dims)), &dims)).collect();
    LocalOperator::permutation(dims, image)
}

/// The diagonal operator `|x⟩ ↦ f(x) |x⟩`.
pub fn diagonal_from_fn(dims: Vec<usize>, f: impl Fn(&[usize]) -> Complex64) -> LocalOperator {
    let d: usize = dims.iter().product();
    let phase = (0..d).map(|j| f(&decode(j, &dims))).collect();
    LocalOperator::diagonal(dims, phase)
}

/// `L^g |h⟩ = |g h⟩`
pub fn left_mult(group: &FiniteGroup, g: usize) -> LocalOperator {
    permutation_from_fn(vec![group.order()], |x| vec![group.mul(g, x[0])])
}

/// `R^g |h⟩ = |h ḡ⟩`
pub fn right_mult(group: &FiniteGroup, g: usize) -> LocalOperator {
    let gi = group.inv(g);
    permutation_from_fn(vec![group.order()], |x| vec![group.mul(x[0], gi)])
}

/// `|h⟩ ↦ |h k⟩`, the X-type correction with exponent `k`.
pub fn right_shift(group: &FiniteGroup, k: usize) -> LocalOperator {
    permutation_from_fn(vec![group.order()], |x| vec![group.mul(x[0], k)])
}

/// `CL |g1, g2⟩ = |g1, g1 g2⟩`
pub fn controlled_left(group: &FiniteGroup) -> LocalOperator {
    let d = group.order();
    permutation_from_fn(vec![d, d], |x| vec![x[0], group.mul(x[0], x[1])])
}

/// `CR |g1, g2⟩ = |g1, g2 ḡ1⟩`
pub fn controlled_right(group: &FiniteGroup) -> LocalOperator {
    let d = group.order();
    permutation_from_fn(vec![d, d], |x| vec![x[0], group.mul(x[1], group.inv(x[0]))])
}

/// `CX |a_v, a_e⟩ = |a_v, a_v a_e⟩`
pub fn cx_abelian(group: &FiniteGroup) -> Result<LocalOperator> {
    group.require_pairing()?;
    Ok(controlled_left(group))
}

/// `CZ |a_v, a_e⟩ = χ^{a_v}(a_e) |a_v, a_e⟩`
pub fn cz_abelian(group: &FiniteGroup) -> Result<LocalOperator> {
    let p = group.require_pairing()?;
    let d = group.order();
    Ok(diagonal_from_fn(vec![d, d], |x| p.chi(x[0], x[1])))
}

/// `Z^a |b⟩ = χ^a(b) |b⟩`
pub fn z_character(group: &FiniteGroup, a: usize) -> Result<LocalOperator> {
    let p = group.require_pairing()?;
    Ok(diagonal_from_fn(vec![group.order()], |x| p.chi(a, x[0])))
}

/// `F_{ab} = χ^a(b) / √|A|`
pub fn fourier_abelian(group: &FiniteGroup) -> Result<LocalOperator> {
    let p = group.require_pairing()?;
    let d = group.order();
    let s = 1.0 / (d as f64).sqrt();
    let m = (0..d * d).map(|k| p.chi(k / d, k % d) * s).collect();
    Ok(LocalOperator::dense(vec![d], m))
}

/// `Z^μ_{ij} |g⟩ = ρ^μ(g)_{ij} |g⟩`; not unitary in general.
pub fn z_irrep_component(irrep: &Irrep, order: usize, i: usize, j: usize) -> LocalOperator {
    diagonal_from_fn(vec![order], |x| irrep.entry(x[0], i, j))
}

/// `tr Π_k ρ(g_k)^{O_k}` along a closed walk, as a diagonal operator on the
/// distinct edges of the walk (returned in ascending order).
pub fn loop_z(
    irrep: &Irrep,
    group: &FiniteGroup,
    cell: &Cellulation,
    walk: &[(usize, Orientation)],
) -> Result<(LocalOperator, Vec<usize>)> {
    if walk.is_empty() {
        return Err(Error::InvalidCellulation(vec!["empty loop".into()]));
    }
    let ends = |(e, o): (usize, Orientation)| {
        let (i, f) = cell.edge(e);
        if o == 1 {
            (i, f)
        } else {
            (f, i)
        }
    };
    for k in 0..walk.len() {
        if walk[k].0 >= cell.num_edges() {
            return Err(Error::InvalidCellulation(vec![format!("loop step {k} names a missing edge")]));
        }
    }
    for k in 0..walk.len() {
        if ends(walk[k]).1 != ends(walk[(k + 1) % walk.len()]).0 {
            return Err(Error::InvalidCellulation(vec![format!("loop is open at step {k}")]));
        }
    }
    let mut edges: Vec<usize> = walk.iter().map(|s| s.0).collect();
    edges.sort_unstable();
    edges.dedup();
    let dims = vec![group.order(); edges.len()];
    let slot: Vec<usize> = walk.iter().map(|s| edges.binary_search(&s.0).unwrap()).collect();
    let op = diagonal_from_fn(dims, |cfg| {
        let mut m = nalgebra::DMatrix::<Complex64>::identity(irrep.dim(), irrep.dim());
        for (k, &(_, o)) in walk.iter().enumerate() {
            let g = cfg[slot[k]];
            let g = if o == 1 { g } else { group.inv(g) };
            m *= irrep.matrix(g);
        }
        m.trace()
    });
    Ok((op, edges))
}

/// `Σ |q, n⟩ = |q, σ^q[n]⟩` on (vertex Q-part, edge N-part).
pub fn sigma_gate(fs: &FactorSystem) -> LocalOperator {
    let dims = vec![fs.q_group().order(), fs.n_group().order()];
    permutation_from_fn(dims, |x| vec![x[0], fs.sigma(x[0], x[1])])
}

pub fn sigma_inv_gate(fs: &FactorSystem) -> LocalOperator {
    let dims = vec![fs.q_group().order(), fs.n_group().order()];
    permutation_from_fn(dims, |x| vec![x[0], fs.sigma_inv(x[0], x[1])])
}

/// `Ω |q1, n, q2⟩ = |q1, n ω̄(q1, q̄1 q2), q2⟩`
pub fn omega_gate(fs: &FactorSystem) -> LocalOperator {
    let (n, q) = (fs.n_group(), fs.q_group());
    let dims = vec![q.order(), n.order(), q.order()];
    permutation_from_fn(dims, |x| {
        let w = fs.omega(x[0], q.ldiv(x[0], x[2]));
        vec![x[0], n.mul(x[1], n.inv(w)), x[2]]
    })
}

/// `|g_i, g_e, g_f⟩ ↦ |g_i, ḡ_i g_e g_f, g_f⟩`, i.e. `CL†_{ie} CR†_{fe}`.
pub fn ug_edge_factor(group: &FiniteGroup) -> LocalOperator {
    let d = group.order();
    permutation_from_fn(vec![d, d, d], |x| vec![x[0], group.mul(group.ldiv(x[0], x[1]), x[2]), x[2]])
}

/// The edge action of `U^{N◁G}` on `(ℂ[G], ℂ[N], ℂ[G])`:
/// `n_e ↦ ω̄(q̄_i, q_i) σ^{q̄_i}[n̄_i n_e n_f] ω(q̄_i, q_f)` with `g = (n, q)`.
pub fn u_ng_edge_factor(fs: &FactorSystem) -> LocalOperator {
    let (g, n, q) = (fs.parent(), fs.n_group(), fs.q_group());
    let dims = vec![g.order(), n.order(), g.order()];
    permutation_from_fn(dims, |x| {
        let (ni, qi) = (fs.tpart(x[0]), fs.proj(x[0]));
        let (nf, qf) = (fs.tpart(x[2]), fs.proj(x[2]));
        let qib = q.inv(qi);
        let inner = n.mul(n.mul(n.inv(ni), x[1]), nf);
        let out = n.mul(n.mul(n.inv(fs.omega(qib, qi)), fs.sigma(qib, inner)), fs.omega(qib, qf));
        vec![x[0], out, x[2]]
    })
}

/// The dressed `Z̃^ν` on (Q-part of `i_e`, edge N-part, Q-part of `f_e`):
/// `χ^ν(σ^{q_i}[n_e] ω(q_i, q̄_i q_f))`. Requires abelian `N`.
pub fn dressed_z(fs: &FactorSystem, nu: usize) -> Result<LocalOperator> {
    let (n, q) = (fs.n_group(), fs.q_group());
    let p = n.require_pairing()?;
    let dims = vec![q.order(), n.order(), q.order()];
    Ok(diagonal_from_fn(dims, |x| {
        let dressed = n.mul(fs.sigma(x[0], x[1]), fs.omega(x[0], q.ldiv(x[0], x[2])));
        p.chi(nu, dressed)
    }))
}

/// `A^g_v` restricted to one edge end: `R^g` if the edge enters the vertex,
/// `L^g` if it leaves.
pub fn vertex_action(group: &FiniteGroup, g: usize, entering: bool) -> LocalOperator {
    if entering {
        right_mult(group, g)
    } else {
        left_mult(group, g)
    }
}

pub fn identity(dims: Vec<usize>) -> LocalOperator {
    LocalOperator::identity(dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{build_cyclic, catalog, irrep_table};
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn z2_gates_are_standard() {
        let z2 = build_cyclic(2).unwrap();
        let cx = cx_abelian(&z2).unwrap().to_dense();
        let want = [[1., 0., 0., 0.], [0., 1., 0., 0.], [0., 0., 0., 1.], [0., 0., 1., 0.]];
        for r in 0..4 {
            for col in 0..4 {
                assert_eq!(cx[r * 4 + col], c(want[r][col], 0.0));
            }
        }
        let cz = cz_abelian(&z2).unwrap().to_dense();
        assert_eq!(cz[15], c(-1.0, 0.0));
        assert_eq!(cz[0], c(1.0, 0.0));
        let f = fourier_abelian(&z2).unwrap();
        let h = 0.5f64.sqrt();
        let fd = f.to_dense();
        assert!((fd[3] + h).norm() < 1e-15 && (fd[0] - h).norm() < 1e-15);
        assert!(f.compose(&f).max_deviation(&LocalOperator::identity(vec![2])) < 1e-15);
        assert_eq!(left_mult(&z2, 1).to_dense()[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn fourier_turns_cx_into_cz() {
        let z3 = build_cyclic(3).unwrap();
        let f = fourier_abelian(&z3).unwrap();
        let one_f = LocalOperator::identity(vec![3]).tensor(&f);
        let lhs = one_f.compose(&cx_abelian(&z3).unwrap()).compose(&one_f.adjoint());
        assert!(lhs.max_deviation(&cz_abelian(&z3).unwrap()) < 1e-12);
        assert!(cz_abelian(&catalog::symmetric(3)).is_err());
    }

    #[test]
    fn unitarity() {
        for g in catalog::identity_suite_groups() {
            for op in [controlled_left(&g), controlled_right(&g), ug_edge_factor(&g), left_mult(&g, 1)] {
                assert!(op.is_unitary());
                assert!(op.adjoint().compose(&op).max_deviation(&LocalOperator::identity(op.dims().to_vec())) < 1e-12);
            }
        }
        let fs = catalog::d4_factor_system();
        assert!(omega_gate(&fs).is_unitary());
        assert!(sigma_gate(&fs).is_unitary());
        assert!(u_ng_edge_factor(&fs).is_unitary());
    }

    #[test]
    fn lr_leave_identity_invariant() {
        let g = catalog::symmetric(3);
        for x in g.elements() {
            let op = left_mult(&g, x).compose(&right_mult(&g, x));
            let OpKind::Monomial { image, .. } = op.kind().clone() else { panic!() };
            assert_eq!(image[0], 0);
        }
    }

    #[test]
    fn trivial_factor_data_gives_identity_gates() {
        let n = Arc::new(build_cyclic(3).unwrap());
        let q = Arc::new(build_cyclic(2).unwrap());
        let fs = FactorSystem::split_trivial(n, q);
        assert!(sigma_gate(&fs).max_deviation(&LocalOperator::identity(vec![2, 3])) == 0.0);
        assert!(omega_gate(&fs).max_deviation(&LocalOperator::identity(vec![2, 3, 2])) == 0.0);
    }

    #[test]
    fn d4_omega_example() {
        let fs = catalog::d4_factor_system();
        let q = fs.q_group();
        // (a, b) at index 2a + b; q1 = (1,0), q̄1 q2 = (0,1) ⇒ q2 = (1,1)
        let (q1, q2) = (2, 3);
        assert_eq!(q.ldiv(q1, q2), 1);
        let op = omega_gate(&fs);
        let dims = op.dims().to_vec();
        let OpKind::Monomial { image, .. } = op.kind().clone() else { panic!() };
        let out = decode(image[encode(&[q1, 0, q2], &dims)], &dims);
        assert_eq!(out, vec![q1, 1, q2]);
    }

    #[test]
    fn ug_on_identity_edge_is_domain_wall() {
        let g = catalog::symmetric(3);
        let op = ug_edge_factor(&g);
        let OpKind::Monomial { image, .. } = op.kind().clone() else { panic!() };
        let dims = vec![6, 6, 6];
        for a in g.elements() {
            for b in g.elements() {
                let out = decode(image[encode(&[a, 0, b], &dims)], &dims);
                assert_eq!(out[1], g.ldiv(a, b));
            }
        }
    }

    #[test]
    fn loops() {
        let z2 = Arc::new(build_cyclic(2).unwrap());
        let t = irrep_table(&z2).unwrap();
        let cell = Cellulation::square_torus(2, 2).unwrap();
        let (op, edges) = loop_z(&t.irreps()[1], &z2, &cell, cell.boundary(0)).unwrap();
        assert_eq!(edges.len(), 4);
        let OpKind::Monomial { phase, .. } = op.kind().clone() else { panic!() };
        for (j, ph) in phase.iter().enumerate() {
            let parity = decode(j, &[2; 4]).iter().sum::<usize>() % 2;
            assert_eq!(*ph, c(if parity == 0 { 1.0 } else { -1.0 }, 0.0));
        }
        let (triv, _) = loop_z(&t.irreps()[0], &z2, &cell, cell.boundary(0)).unwrap();
        assert_eq!(triv.max_deviation(&LocalOperator::identity(vec![2; 4])), 0.0);
        assert!(loop_z(&t.irreps()[1], &z2, &cell, &cell.boundary(0)[..3]).is_err());
    }
}
