//! Directed cellulations of closed orientable surfaces.
//!
//! Edge `e` runs from `i_e` to `f_e`. A plaquette is a closed boundary walk
//! of `(edge, orientation)` steps, with orientation `+1` when the walk
//! follows the edge from `i_e` to `f_e`. Every edge is walked once in each
//! direction. The dual edge `ě` runs from the plaquette that walks `e`
//! backwards to the plaquette that walks it forwards.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step orientation along a boundary walk or path.
pub type Orientation = i8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cellulation {
    name: String,
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    plaquettes: Vec<Vec<(usize, Orientation)>>,
    dual_edges: Vec<(usize, usize)>,
    /// `None` for a bare graph without plaquettes.
    genus: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellulationDoc {
    name: String,
    genus: Option<usize>,
    vertices: Vec<usize>,
    edges: Vec<[usize; 2]>,
    plaquettes: Vec<Vec<(usize, Orientation)>>,
    dual_edges: Vec<[usize; 2]>,
}

impl Cellulation {
    /// Validates every invariant, collecting all violations.
    fn checked(
        name: String,
        num_vertices: usize,
        edges: Vec<(usize, usize)>,
        plaquettes: Vec<Vec<(usize, Orientation)>>,
        dual_edges: Option<Vec<(usize, usize)>>,
        genus: Option<usize>,
    ) -> Result<Self> {
        let mut errs = Vec::new();
        for (e, &(i, f)) in edges.iter().enumerate() {
            if i >= num_vertices || f >= num_vertices {
                errs.push(format!("edge {e} has an endpoint out of range"));
            } else if i == f {
                errs.push(format!("edge {e} is a self-loop at vertex {i}"));
            }
        }
        if !errs.is_empty() {
            return Err(Error::InvalidCellulation(errs));
        }
        let mut fwd = vec![Vec::new(); edges.len()];
        let mut bwd = vec![Vec::new(); edges.len()];
        for (p, walk) in plaquettes.iter().enumerate() {
            if walk.is_empty() {
                errs.push(format!("plaquette {p} has an empty boundary"));
                continue;
            }
            let mut ok = true;
            for &(e, o) in walk {
                if e >= edges.len() || (o != 1 && o != -1) {
                    errs.push(format!("plaquette {p} has an invalid step ({e}, {o})"));
                    ok = false;
                } else if o == 1 {
                    fwd[e].push(p);
                } else {
                    bwd[e].push(p);
                }
            }
            if !ok {
                continue;
            }
            let ends = |(e, o): (usize, Orientation)| {
                let (i, f) = edges[e];
                if o == 1 {
                    (i, f)
                } else {
                    (f, i)
                }
            };
            for k in 0..walk.len() {
                let (_, end) = ends(walk[k]);
                let (start, _) = ends(walk[(k + 1) % walk.len()]);
                if end != start {
                    errs.push(format!("plaquette {p} boundary is not a closed walk at step {k}"));
                    break;
                }
            }
        }
        let surface = genus.is_some();
        let mut derived_dual = Vec::with_capacity(edges.len());
        if surface {
            for e in 0..edges.len() {
                if fwd[e].len() != 1 || bwd[e].len() != 1 {
                    errs.push(format!(
                        "edge {e} is walked {} times forwards and {} times backwards; expected once each",
                        fwd[e].len(),
                        bwd[e].len()
                    ));
                    derived_dual.push((usize::MAX, usize::MAX));
                } else {
                    derived_dual.push((bwd[e][0], fwd[e][0]));
                }
            }
            let euler = num_vertices as i64 - edges.len() as i64 + plaquettes.len() as i64;
            let want = 2 - 2 * genus.unwrap() as i64;
            if euler != want {
                errs.push(format!("Euler characteristic {euler} does not match genus (expected {want})"));
            }
        } else if !plaquettes.is_empty() {
            errs.push("a graph without genus must not have plaquettes".into());
        }
        let dual_edges = match dual_edges {
            Some(d) => {
                if surface {
                    if d.len() != edges.len() {
                        errs.push(format!("{} dual edges for {} edges", d.len(), edges.len()));
                    } else {
                        for (e, (&given, &want)) in d.iter().zip(&derived_dual).enumerate() {
                            if given != want && want.0 != usize::MAX {
                                errs.push(format!(
                                    "dual edge {e} is ({}, {}) but must run from plaquette {} to {}",
                                    given.0, given.1, want.0, want.1
                                ));
                            }
                        }
                    }
                } else if !d.is_empty() {
                    errs.push("a graph without genus must not have dual edges".into());
                }
                d
            }
            None => derived_dual,
        };
        if !errs.is_empty() {
            return Err(Error::InvalidCellulation(errs));
        }
        Ok(Self { name, num_vertices, edges, plaquettes, dual_edges, genus })
    }

    /// `lx × ly` square lattice on the torus; vertex `(x, y)` is `y·lx + x`,
    /// edge `2v` points `+x` and edge `2v+1` points `+y` from vertex `v`.
    /// Plaquette `(x, y)` has lower-left corner `(x, y)` and is walked
    /// counter-clockwise.
    pub fn square_torus(lx: usize, ly: usize) -> Result<Self> {
        if lx < 2 || ly < 2 {
            return Err(Error::InvalidCellulation(vec![format!("square torus needs lx, ly ≥ 2, got {lx}×{ly}")]));
        }
        let v = |x: usize, y: usize| (y % ly) * lx + (x % lx);
        let mut edges = Vec::with_capacity(2 * lx * ly);
        for y in 0..ly {
            for x in 0..lx {
                edges.push((v(x, y), v(x + 1, y)));
                edges.push((v(x, y), v(x, y + 1)));
            }
        }
        let h = |x: usize, y: usize| 2 * v(x, y);
        let vert = |x: usize, y: usize| 2 * v(x, y) + 1;
        let mut plaquettes = Vec::with_capacity(lx * ly);
        for y in 0..ly {
            for x in 0..lx {
                plaquettes.push(vec![(h(x, y), 1), (vert(x + 1, y), 1), (h(x, y + 1), -1), (vert(x, y), -1)]);
            }
        }
        Self::checked(format!("square:{lx}x{ly}"), lx * ly, edges, plaquettes, None, Some(1))
    }

    /// Two vertices and three edges `v0 → v1`, glued into a single hexagonal
    /// plaquette with opposite sides identified.
    pub fn hexagon_torus() -> Self {
        let edges = vec![(0, 1); 3];
        let walk = vec![(0, 1), (1, -1), (2, 1), (0, -1), (1, 1), (2, -1)];
        Self::checked("hexagon".into(), 2, edges, vec![walk], None, Some(1)).expect("valid hexagon torus")
    }

    /// An `n`-cycle `k → k+1` on the sphere: plaquette 0 walks the cycle
    /// forwards and plaquette 1 backwards.
    pub fn polygon_sphere(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidCellulation(vec![format!("polygon needs n ≥ 2, got {n}")]));
        }
        let edges = (0..n).map(|k| (k, (k + 1) % n)).collect();
        let front = (0..n).map(|e| (e, 1)).collect();
        let back = (0..n).rev().map(|e| (e, -1)).collect();
        Self::checked(format!("polygon:{n}"), n, edges, vec![front, back], None, Some(0))
    }

    /// A bare directed graph, with no plaquettes.
    pub fn graph(num_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::checked("graph".into(), num_vertices, edges, Vec::new(), None, None)
    }

    /// The two-vertex, one-edge graph `0 → 1`.
    pub fn single_edge() -> Self {
        Self::checked("edge".into(), 2, vec![(0, 1)], Vec::new(), None, None).expect("valid graph")
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let d: CellulationDoc = serde_json::from_str(doc)?;
        if d.vertices.iter().enumerate().any(|(k, &v)| k != v) {
            return Err(Error::InvalidCellulation(vec!["vertices must be listed as 0..V-1".into()]));
        }
        Self::checked(
            d.name,
            d.vertices.len(),
            d.edges.iter().map(|e| (e[0], e[1])).collect(),
            d.plaquettes,
            Some(d.dual_edges.iter().map(|e| (e[0], e[1])).collect()),
            d.genus,
        )
    }

    pub fn to_json(&self) -> String {
        let doc = CellulationDoc {
            name: self.name.clone(),
            genus: self.genus,
            vertices: (0..self.num_vertices).collect(),
            edges: self.edges.iter().map(|&(i, f)| [i, f]).collect(),
            plaquettes: self.plaquettes.clone(),
            dual_edges: self.dual_edges.iter().map(|&(i, f)| [i, f]).collect(),
        };
        serde_json::to_string(&doc).expect("serializable")
    }

    /// Parses `square:LxM`, `hexagon`, `polygon:N`, `edge`, or a path to a
    /// JSON document.
    pub fn from_spec(spec: &str) -> Result<Self> {
        if spec == "hexagon" {
            return Ok(Self::hexagon_torus());
        }
        if spec == "edge" {
            return Ok(Self::single_edge());
        }
        if let Some(dims) = spec.strip_prefix("square:") {
            let (a, b) =
                dims.split_once('x').ok_or_else(|| Error::Parse(format!("bad square lattice spec '{spec}'")))?;
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad size '{s}'")));
            return Self::square_torus(parse(a)?, parse(b)?);
        }
        if let Some(n) = spec.strip_prefix("polygon:") {
            let n = n.parse::<usize>().map_err(|_| Error::Parse(format!("bad polygon size '{n}'")))?;
            return Self::polygon_sphere(n);
        }
        let text = std::fs::read_to_string(spec)?;
        Self::from_json(&text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_plaquettes(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn genus(&self) -> Option<usize> {
        self.genus
    }

    pub fn is_surface(&self) -> bool {
        self.genus.is_some()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices as i64 - self.edges.len() as i64 + self.plaquettes.len() as i64
    }

    /// `(i_e, f_e)`
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn boundary(&self, p: usize) -> &[(usize, Orientation)] {
        &self.plaquettes[p]
    }

    /// `(i_ě, f_ě)`
    pub fn dual_edge(&self, e: usize) -> (usize, usize) {
        self.dual_edges[e]
    }

    /// Edges leaving `v` (`i_e = v`) and entering `v` (`f_e = v`).
    pub fn incident(&self, v: usize) -> (Vec<usize>, Vec<usize>) {
        let out = (0..self.edges.len()).filter(|&e| self.edges[e].0 == v).collect();
        let inc = (0..self.edges.len()).filter(|&e| self.edges[e].1 == v).collect();
        (out, inc)
    }

    /// BFS spanning tree of the vertex graph rooted at vertex 0.
    pub fn spanning_tree(&self) -> Result<SpanningTree> {
        SpanningTree::bfs(self.num_vertices, &self.edges)
    }

    /// BFS spanning tree of the dual graph rooted at plaquette 0.
    pub fn dual_spanning_tree(&self) -> Result<SpanningTree> {
        if !self.is_surface() {
            return Err(Error::Unsupported("dual tree of a graph without plaquettes".into()));
        }
        SpanningTree::bfs(self.plaquettes.len(), &self.dual_edges)
    }
}

/// A rooted spanning tree over `n` nodes of a directed graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    /// For each non-root node, the tree edge to its parent and the parent.
    parent: Vec<Option<(usize, usize)>>,
    /// Nodes in BFS order; `order[0]` is the root.
    order: Vec<usize>,
}

impl SpanningTree {
    fn bfs(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (e, &(i, f)) in edges.iter().enumerate() {
            if i != f {
                adj[i].push((e, f));
                adj[f].push((e, i));
            }
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        if n > 0 {
            seen[0] = true;
            let mut queue = VecDeque::from([0]);
            while let Some(x) = queue.pop_front() {
                order.push(x);
                for &(e, y) in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        parent[y] = Some((e, x));
                        queue.push_back(y);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(Error::Disconnected);
        }
        Ok(Self { parent, order })
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn edges(&self) -> Vec<usize> {
        let mut es: Vec<usize> = self.parent.iter().flatten().map(|&(e, _)| e).collect();
        es.sort_unstable();
        es
    }

    pub fn parent(&self, v: usize) -> Option<(usize, usize)> {
        self.parent[v]
    }

    pub fn bfs_order(&self) -> &[usize] {
        &self.order
    }

    /// Tree edges from `v` up to the root.
    pub fn path_to_root(&self, v: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut x = v;
        while let Some((e, p)) = self.parent[x] {
            path.push(e);
            x = p;
        }
        path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let c = Cellulation::square_torus(2, 2).unwrap();
        assert_eq!((c.num_vertices(), c.num_edges(), c.num_plaquettes()), (4, 8, 4));
        assert_eq!(c.euler_characteristic(), 0);
        let c = Cellulation::square_torus(2, 3).unwrap();
        assert_eq!((c.num_vertices(), c.num_edges(), c.num_plaquettes()), (6, 12, 6));
        assert!(Cellulation::square_torus(1, 3).is_err());
        let h = Cellulation::hexagon_torus();
        assert_eq!(h.euler_characteristic(), 0);
        assert_eq!(h.boundary(0).len(), 6);
        assert!(h.edges().iter().all(|&(i, f)| i != f));
        let s = Cellulation::polygon_sphere(3).unwrap();
        assert_eq!(s.euler_characteristic(), 2);
    }

    #[test]
    fn trees() {
        let c = Cellulation::square_torus(2, 2).unwrap();
        assert_eq!(c.spanning_tree().unwrap().edges().len(), 3);
        assert_eq!(c.dual_spanning_tree().unwrap().edges().len(), 3);
        let h = Cellulation::hexagon_torus();
        assert_eq!(h.spanning_tree().unwrap().edges().len(), 1);
        assert!(h.dual_spanning_tree().unwrap().edges().is_empty());
        let g = Cellulation::graph(3, vec![(0, 1)]).unwrap();
        assert_eq!(g.spanning_tree(), Err(Error::Disconnected));
    }

    #[test]
    fn json_round_trip() {
        let c = Cellulation::square_torus(2, 2).unwrap();
        let s = c.to_json();
        let back = Cellulation::from_json(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn json_rejections() {
        let c = Cellulation::square_torus(2, 2).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        let walk = doc["plaquettes"][2].as_array_mut().unwrap();
        walk.reverse();
        let err = Cellulation::from_json(&doc.to_string()).unwrap_err();
        let Error::InvalidCellulation(msgs) = err else { panic!() };
        assert!(msgs.iter().any(|m| m.contains("plaquette 2")), "{msgs:?}");

        let mut doc: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        doc["edges"][0] = serde_json::json!([1, 1]);
        let err = Cellulation::from_json(&doc.to_string()).unwrap_err();
        let Error::InvalidCellulation(msgs) = err else { panic!() };
        assert!(msgs.iter().any(|m| m.contains("self-loop")));

        let mut doc: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        doc["genus"] = serde_json::json!(0);
        assert!(Cellulation::from_json(&doc.to_string()).is_err());
    }

    #[test]
    fn dual_edges_name_both_plaquettes() {
        for c in [Cellulation::square_torus(3, 2).unwrap(), Cellulation::hexagon_torus()] {
            for e in 0..c.num_edges() {
                let (pi, pf) = c.dual_edge(e);
                assert!(c.boundary(pi).contains(&(e, -1)));
                assert!(c.boundary(pf).contains(&(e, 1)));
            }
        }
    }
}
