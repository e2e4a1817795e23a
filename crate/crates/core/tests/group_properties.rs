use std::sync::Arc;

use proptest::prelude::*;

use kwprep::groups::{
    catalog, center, derived_series, extension_from_factor_system, factor_system_of, irrep_table, is_isomorphic,
    normal_subgroups, FactorSystem, FiniteGroup,
};

const NAMES: &[&str] = &["Z2", "Z3", "Z4", "Z6", "Z2xZ2", "Z2xZ3", "S3", "D4", "Q8", "A4", "S4"];

fn group(name: &str) -> Arc<FiniteGroup> {
    catalog::by_name(name).unwrap().group
}

fn systems(name: &str) -> Vec<FactorSystem> {
    let g = group(name);
    normal_subgroups(&g).iter().map(|n| factor_system_of(&g, n).unwrap()).collect()
}

proptest! {
    #[test]
    fn group_axioms(k in 0..NAMES.len(), a in 0usize..24, b in 0usize..24, c in 0usize..24) {
        let g = group(NAMES[k]);
        let (a, b, c) = (a % g.order(), b % g.order(), c % g.order());
        prop_assert_eq!(g.mul(g.mul(a, b), c), g.mul(a, g.mul(b, c)));
        prop_assert_eq!(g.mul(a, g.identity()), a);
        prop_assert_eq!(g.mul(g.inv(a), a), g.identity());
        prop_assert_eq!(g.mul(a, g.ldiv(a, b)), b);
    }

    #[test]
    fn factor_system_splits_elements(k in 0..NAMES.len(), x in 0usize..24, y in 0usize..24) {
        for fs in systems(NAMES[k]) {
            let g = fs.parent();
            let (x, y) = (x % g.order(), y % g.order());
            prop_assert_eq!(fs.element(fs.tpart(x), fs.proj(x)), x);
            // the projection is a homomorphism
            prop_assert_eq!(fs.proj(g.mul(x, y)), fs.q_group().mul(fs.proj(x), fs.proj(y)));
            // twisted product of pairs
            let (n1, q1, n2, q2) = (fs.tpart(x), fs.proj(x), fs.tpart(y), fs.proj(y));
            let n = fs.n_group();
            let want = fs.element(n.mul(n.mul(n1, fs.sigma(q1, n2)), fs.omega(q1, q2)), fs.q_group().mul(q1, q2));
            prop_assert_eq!(g.mul(x, y), want);
        }
    }
}

#[test]
fn factor_systems_round_trip() {
    for name in NAMES {
        for fs in systems(name) {
            let rebuilt = extension_from_factor_system(&fs).unwrap();
            assert!(is_isomorphic(&rebuilt, fs.parent()), "{name} N={}", fs.n_group().order());
            assert!(fs.sigma_composition_holds());
        }
    }
}

#[test]
fn cocycle_condition_is_exact() {
    for name in NAMES {
        for fs in systems(name) {
            let (n, q) = (fs.n_group(), fs.q_group());
            for a in q.elements() {
                for b in q.elements() {
                    for c in q.elements() {
                        let lhs = n.mul(fs.omega(a, b), fs.omega(q.mul(a, b), c));
                        let rhs = n.mul(fs.sigma(a, fs.omega(b, c)), fs.omega(a, q.mul(b, c)));
                        assert_eq!(lhs, rhs, "{name}");
                    }
                }
            }
        }
    }
}

#[test]
fn derived_series_of_s4() {
    let ds = derived_series(&group("S4"));
    assert_eq!(ds.orders(), vec![24, 12, 4, 1]);
    assert_eq!(ds.derived_length, Some(3));
    let a5 = derived_series(&group("A5"));
    assert_eq!(a5.derived_length, None);
    assert!(a5.perfect_core().is_whole());
}

#[test]
fn centers() {
    let want = [("S3", 1), ("D4", 2), ("Q8", 2), ("A4", 1), ("S4", 1), ("Z6", 6)];
    for (name, order) in want {
        assert_eq!(center(&group(name)).order(), order, "{name}");
    }
}

#[test]
fn catalog_extensions_are_central() {
    for fs in [catalog::d4_factor_system(), catalog::q8_factor_system()] {
        assert!(kwprep::groups::is_nil2_extension(&fs));
        assert!(!fs.parent().is_abelian());
    }
    assert!(!catalog::s3_factor_system().is_sigma_trivial());
}

#[test]
fn irrep_dimensions_square_sum() {
    for name in NAMES {
        let g = group(name);
        let t = irrep_table(&g).unwrap();
        assert_eq!(t.dims().iter().map(|d| d * d).sum::<usize>(), g.order(), "{name}");
        assert_eq!(t.len(), g.conjugacy_classes().len(), "{name}");
    }
}

#[test]
fn catalog_document_loads() {
    let doc = r#"[
        {"name": "C2", "order": 2, "mult_table": [[0, 1], [1, 0]]},
        {"name": "Q8doc", "extension": {"n": "Z2", "q": "Z2xZ2",
            "sigma": [[0, 1], [0, 1], [0, 1], [0, 1]],
            "omega": [[0, 0, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [0, 1, 0, 1]]}}
    ]"#;
    let entries = catalog::load_catalog(doc).unwrap();
    assert_eq!(entries.len(), 2);
    let fs = entries[1].factor_system.as_ref().unwrap();
    assert_eq!(fs.parent().order(), 8);
    assert!(!fs.parent().is_abelian());
    assert!(catalog::load_catalog(r#"[{"name": "bad", "order": 3, "mult_table": [[0, 1], [1, 0]]}]"#).is_err());
}
