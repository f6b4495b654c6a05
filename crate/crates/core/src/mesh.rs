//! Meshes of the parameter spaces: interval, circle, square, torus and sphere.
//!
//! Coordinates follow fixed conventions: the interval is `[0, 1]`, circle and
//! torus nodes carry angles in `[0, 2π)`, the square is `[0, 1]²` and sphere
//! nodes are unit vectors in ℝ³. Plaquettes are oriented counter-clockwise in
//! their local chart; on the sphere this is the orientation induced by the
//! outward normal.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeshKind {
    Interval,
    Circle,
    Square,
    Torus,
    Sphere,
}

impl MeshKind {
    pub const ALL: [MeshKind; 5] = [
        MeshKind::Interval,
        MeshKind::Circle,
        MeshKind::Square,
        MeshKind::Torus,
        MeshKind::Sphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshKind::Interval => "interval",
            MeshKind::Circle => "circle",
            MeshKind::Square => "square",
            MeshKind::Torus => "torus",
            MeshKind::Sphere => "sphere",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn dimension(self) -> usize {
        match self {
            MeshKind::Interval | MeshKind::Circle => 1,
            MeshKind::Square | MeshKind::Torus | MeshKind::Sphere => 2,
        }
    }

    /// Euler characteristic of the underlying space.
    pub fn euler_characteristic(self) -> i64 {
        match self {
            MeshKind::Interval | MeshKind::Square => 1,
            MeshKind::Circle | MeshKind::Torus => 0,
            MeshKind::Sphere => 2,
        }
    }

    fn min_resolution(self) -> usize {
        match self {
            MeshKind::Interval | MeshKind::Square => 2,
            MeshKind::Circle | MeshKind::Torus | MeshKind::Sphere => 3,
        }
    }
}

impl std::fmt::Display for MeshKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Oriented edge `tail → head`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// Oriented quadrilateral. `edges[k]` joins `nodes[k]` to `nodes[(k+1) % 4]`;
/// its sign is `+1` when the edge orientation agrees with the traversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plaquette {
    pub nodes: [usize; 4],
    pub edges: [(usize, i8); 4],
    /// `(face, i, j)`: chart index and cell position within it.
    pub chart: (usize, usize, usize),
}

/// A signed edge chain, used for cycles.
pub type Chain = Vec<(usize, i8)>;

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    kind: MeshKind,
    resolution: usize,
    coords: Vec<[f64; 3]>,
    edges: Vec<Edge>,
    plaquettes: Vec<Plaquette>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Breadth-first spanning tree rooted at node 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    pub root: usize,
    /// Tree edges in discovery order.
    pub edges: Vec<usize>,
    /// `(parent, edge)` for every node except the root.
    pub parent: Vec<Option<(usize, usize)>>,
    /// Nodes in breadth-first order, root first.
    pub order: Vec<usize>,
}

impl SpanningTree {
    pub fn contains(&self, edge: usize) -> bool {
        self.edges.contains(&edge)
    }
}

impl Mesh {
    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn closed_1d(&self) -> bool {
        self.kind == MeshKind::Circle
    }

    pub fn closed_2d(&self) -> bool {
        matches!(self.kind, MeshKind::Torus | MeshKind::Sphere)
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn coord(&self, node: usize) -> [f64; 3] {
        self.coords[node]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    /// `(neighbor, edge)` pairs sorted by neighbor id.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.coords.len() as i64 - self.edges.len() as i64 + self.plaquettes.len() as i64
    }

    /// Deterministic breadth-first spanning tree from node 0, visiting
    /// neighbors in id order.
    pub fn spanning_tree(&self) -> SpanningTree {
        let n = self.node_count();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut edges = Vec::with_capacity(n.saturating_sub(1));
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for &(y, e) in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some((x, e));
                    edges.push(e);
                    queue.push_back(y);
                }
            }
        }
        SpanningTree {
            root: 0,
            edges,
            parent,
            order,
        }
    }

    /// Generators of the first homology: empty for the interval, square and
    /// sphere, the full loop for the circle, and one loop per periodic
    /// direction for the torus.
    pub fn cycle_basis(&self) -> Vec<Chain> {
        let n = self.resolution;
        match self.kind {
            MeshKind::Interval | MeshKind::Square | MeshKind::Sphere => Vec::new(),
            MeshKind::Circle => vec![(0..n).map(|e| (e, 1)).collect()],
            MeshKind::Torus => {
                let horizontal = (0..n).map(|i| (self.grid_edge(i, 0, 0), 1)).collect();
                let vertical = (0..n).map(|j| (self.grid_edge(0, j, 1), 1)).collect();
                vec![horizontal, vertical]
            }
        }
    }

    /// Edge leaving grid node `(i, j)` in direction `dir` (0 = x, 1 = y).
    fn grid_edge(&self, i: usize, j: usize, dir: usize) -> usize {
        let tail = j * self.resolution + i;
        self.adjacency[tail]
            .iter()
            .map(|&(_, e)| e)
            .find(|&e| {
                let edge = self.edges[e];
                edge.tail == tail && self.edge_direction(e) == dir
            })
            .expect("grid edge exists")
    }

    fn edge_direction(&self, e: usize) -> usize {
        let n = self.resolution;
        let Edge { tail, head } = self.edges[e];
        if tail / n == head / n {
            0
        } else {
            1
        }
    }

    /// Walks a chain and returns the traversed `(from, to)` node pairs.
    pub fn chain_steps(&self, chain: &[(usize, i8)]) -> Vec<(usize, usize)> {
        chain
            .iter()
            .map(|&(e, s)| {
                let edge = self.edges[e];
                if s > 0 {
                    (edge.tail, edge.head)
                } else {
                    (edge.head, edge.tail)
                }
            })
            .collect()
    }
}

struct Builder {
    coords: Vec<[f64; 3]>,
    edges: Vec<Edge>,
    plaquettes: Vec<Plaquette>,
    lookup: HashMap<(usize, usize), usize>,
}

impl Builder {
    fn new(coords: Vec<[f64; 3]>) -> Self {
        Self {
            coords,
            edges: Vec::new(),
            plaquettes: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    fn edge(&mut self, tail: usize, head: usize) -> usize {
        let key = (tail.min(head), tail.max(head));
        if let Some(&e) = self.lookup.get(&key) {
            return e;
        }
        let id = self.edges.len();
        self.edges.push(Edge { tail, head });
        self.lookup.insert(key, id);
        id
    }

    fn plaquette(&mut self, nodes: [usize; 4], chart: (usize, usize, usize)) {
        let mut edges = [(0usize, 1i8); 4];
        for k in 0..4 {
            let (a, b) = (nodes[k], nodes[(k + 1) % 4]);
            let e = self.edge(a, b);
            let sign = if self.edges[e].tail == a { 1 } else { -1 };
            edges[k] = (e, sign);
        }
        self.plaquettes.push(Plaquette { nodes, edges, chart });
    }

    fn finish(self, kind: MeshKind, resolution: usize) -> Mesh {
        let mut adjacency = vec![Vec::new(); self.coords.len()];
        for (id, e) in self.edges.iter().enumerate() {
            adjacency[e.tail].push((e.head, id));
            adjacency[e.head].push((e.tail, id));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Mesh {
            kind,
            resolution,
            coords: self.coords,
            edges: self.edges,
            plaquettes: self.plaquettes,
            adjacency,
        }
    }
}

/// Builds the mesh of `kind` at resolution `n`.
///
/// Interval: path on `n` nodes. Circle: cycle on `n` nodes. Square: `n×n` grid.
/// Torus: periodic `n×n` grid. Sphere: cube-sphere with `n×n` cells per face,
/// projected with the equiangular map.
pub fn build_mesh(kind: MeshKind, n: usize) -> Result<Mesh> {
    if n < kind.min_resolution() {
        return Err(Error::BadResolution { kind, resolution: n });
    }
    let mesh = match kind {
        MeshKind::Interval => {
            let h = 1.0 / (n - 1) as f64;
            let mut b = Builder::new((0..n).map(|i| [i as f64 * h, 0.0, 0.0]).collect());
            for i in 0..n - 1 {
                b.edge(i, i + 1);
            }
            b.finish(kind, n)
        }
        MeshKind::Circle => {
            let h = 2.0 * PI / n as f64;
            let mut b = Builder::new((0..n).map(|i| [i as f64 * h, 0.0, 0.0]).collect());
            for i in 0..n {
                b.edge(i, (i + 1) % n);
            }
            b.finish(kind, n)
        }
        MeshKind::Square => grid(kind, n, false),
        MeshKind::Torus => grid(kind, n, true),
        MeshKind::Sphere => cube_sphere(n),
    };
    Ok(mesh)
}

fn grid(kind: MeshKind, n: usize, periodic: bool) -> Mesh {
    let (h, cells) = if periodic {
        (2.0 * PI / n as f64, n)
    } else {
        (1.0 / (n - 1) as f64, n - 1)
    };
    let id = |i: usize, j: usize| (j % n) * n + (i % n);
    let mut coords = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            coords.push([i as f64 * h, j as f64 * h, 0.0]);
        }
    }
    let mut b = Builder::new(coords);
    for j in 0..n {
        for i in 0..n {
            if periodic || i + 1 < n {
                b.edge(id(i, j), id(i + 1, j));
            }
            if periodic || j + 1 < n {
                b.edge(id(i, j), id(i, j + 1));
            }
        }
    }
    for j in 0..cells {
        for i in 0..cells {
            b.plaquette([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)], (0, i, j));
        }
    }
    b.finish(kind, n)
}

fn cube_sphere(n: usize) -> Mesh {
    let mut index = HashMap::new();
    let mut coords = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let on_surface = [i, j, k].iter().any(|&c| c == 0 || c == n);
                if on_surface {
                    index.insert([i, j, k], coords.len());
                    let p = [i, j, k].map(|c| (FRAC_PI_4 * (2.0 * c as f64 / n as f64 - 1.0)).tan());
                    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    coords.push([p[0] / r, p[1] / r, p[2] / r]);
                }
            }
        }
    }
    let mut b = Builder::new(coords);
    for axis in 0..3 {
        let (u_axis, v_axis) = ((axis + 1) % 3, (axis + 2) % 3);
        for (side, level) in [(0usize, 0usize), (1, n)] {
            let face = 2 * axis + side;
            for u in 0..n {
                for v in 0..n {
                    let point = |du: usize, dv: usize| {
                        let mut p = [0usize; 3];
                        p[axis] = level;
                        p[u_axis] = u + du;
                        p[v_axis] = v + dv;
                        index[&p]
                    };
                    // (u, v) → (u+1, v) → (u+1, v+1) is counter-clockwise about +e_axis.
                    let mut nodes = [point(0, 0), point(1, 0), point(1, 1), point(0, 1)];
                    if side == 0 {
                        nodes.reverse();
                    }
                    b.plaquette(nodes, (face, u, v));
                }
            }
        }
    }
    b.finish(MeshKind::Sphere, n)
}
