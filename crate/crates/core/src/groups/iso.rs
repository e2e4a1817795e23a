use super::FiniteGroup;

/// A small generating set, highest element order first.
fn generators(g: &FiniteGroup) -> Vec<usize> {
    let mut by_order: Vec<usize> = g.elements().skip(1).collect();
    by_order.sort_by_key(|&x| (std::cmp::Reverse(g.element_order(x)), x));
    let mut gens = Vec::new();
    let mut span = vec![0];
    for x in by_order {
        if span.len() == g.order() {
            break;
        }
        if span.binary_search(&x).is_err() {
            gens.push(x);
            span = g.generate(gens.iter().copied());
        }
    }
    gens
}

fn order_profile(g: &FiniteGroup) -> Vec<usize> {
    let mut p: Vec<usize> = g.elements().map(|x| g.element_order(x)).collect();
    p.sort_unstable();
    p
}

/// Extends a generator assignment to a full map by walking the Cayley graph;
/// fails on inconsistency or non-injectivity.
fn extend(a: &FiniteGroup, b: &FiniteGroup, gens: &[usize], images: &[usize]) -> Option<Vec<usize>> {
    let n = a.order();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    map[0] = 0;
    used[0] = true;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(x) = queue.pop_front() {
        for (&g, &h) in gens.iter().zip(images) {
            let y = a.mul(x, g);
            let fy = b.mul(map[x], h);
            if map[y] == usize::MAX {
                if used[fy] {
                    return None;
                }
                map[y] = fy;
                used[fy] = true;
                queue.push_back(y);
            } else if map[y] != fy {
                return None;
            }
        }
    }
    if map.contains(&usize::MAX) {
        return None;
    }
    // consistency on generators implies a homomorphism; confirm exhaustively
    for x in a.elements() {
        for y in a.elements() {
            if map[a.mul(x, y)] != b.mul(map[x], map[y]) {
                return None;
            }
        }
    }
    Some(map)
}

fn search(a: &FiniteGroup, b: &FiniteGroup, gens: &[usize], images: &mut Vec<usize>) -> Option<Vec<usize>> {
    if images.len() == gens.len() {
        return extend(a, b, gens, images);
    }
    let want = a.element_order(gens[images.len()]);
    for h in b.elements() {
        if b.element_order(h) != want || images.contains(&h) {
            continue;
        }
        images.push(h);
        if let Some(m) = search(a, b, gens, images) {
            return Some(m);
        }
        images.pop();
    }
    None
}

/// An isomorphism `a → b` as an index map, found by backtracking over
/// images of a generating set.
pub fn find_isomorphism(a: &FiniteGroup, b: &FiniteGroup) -> Option<Vec<usize>> {
    if a.order() != b.order() || a.is_abelian() != b.is_abelian() {
        return None;
    }
    if order_profile(a) != order_profile(b) {
        return None;
    }
    let gens = generators(a);
    search(a, b, &gens, &mut Vec::new())
}

pub fn is_isomorphic(a: &FiniteGroup, b: &FiniteGroup) -> bool {
    find_isomorphism(a, b).is_some()
}

#[cfg(test)]
mod tests {
    use super::super::{build_cyclic, catalog, direct_product};
    use super::*;

    #[test]
    fn distinguishes_order_eight() {
        let d4 = catalog::dihedral_perm(4);
        let q8 = catalog::quaternion();
        let z8 = build_cyclic(8).unwrap();
        let z2 = build_cyclic(2).unwrap();
        let z4xz2 = direct_product(&build_cyclic(4).unwrap(), &z2);
        let all = [&d4, &q8, &z8, &z4xz2];
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                assert_eq!(is_isomorphic(a, b), i == j);
            }
        }
    }

    #[test]
    fn map_is_a_homomorphism() {
        let a = catalog::symmetric(4);
        let b = catalog::symmetric(4).with_name("copy");
        let m = find_isomorphism(&a, &b).unwrap();
        for x in a.elements() {
            for y in a.elements() {
                assert_eq!(m[a.mul(x, y)], b.mul(m[x], m[y]));
            }
        }
        assert!(is_isomorphic(
            &direct_product(&build_cyclic(2).unwrap(), &build_cyclic(3).unwrap()),
            &build_cyclic(6).unwrap()
        ));
    }
}
