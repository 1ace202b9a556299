//! Uniform triangulation of the truncated cylinder
//! `{τ1 v1 + τ2 v2 : 0 ≤ τ1 ≤ 1, −L ≤ τ2 ≤ L}`, its degree-of-freedom maps
//! (periodic seam along `v1`, homogeneous Dirichlet rows at `τ2 = ±L`) and
//! the node patches used by gradient recovery.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lattice::{make_honeycomb_basis, LatticeBasis, Vec2};
use crate::linalg::dense;
use crate::scalar::Real;

/// How each sub-rhombus is split into two triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Every rhombus split along the `(i, j) – (i+1, j+1)` diagonal.
    #[default]
    Regular,
    /// Diagonals alternate in a checkerboard (chevron-free criss-cross).
    /// Requires even `N` so the pattern is periodic across the seam.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    /// `τ1 = 0`, owns the periodic degree of freedom.
    SeamMaster,
    /// `τ1 = 1`, identified with the master at the same `τ2`.
    SeamSlave,
    /// `τ2 = ±L`.
    Dirichlet,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::SeamMaster => "seam-master",
            NodeClass::SeamSlave => "seam-slave",
            NodeClass::Dirichlet => "dirichlet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshNode<T> {
    pub i: usize,
    pub j: usize,
    pub tau1: T,
    pub tau2: T,
    pub x: Vec2<T>,
    pub class: NodeClass,
}

/// Geometric mesh. Nodes are numbered `j·(N+1) + i` for `i ∈ 0..=N`,
/// `j ∈ 0..=2LN`; triangles are listed rhombus by rhombus.
#[derive(Debug, Clone)]
pub struct CylinderMesh<T> {
    n: usize,
    l: usize,
    diagonal: Diagonal,
    basis: LatticeBasis<T>,
    pub nodes: Vec<MeshNode<T>>,
    /// Vertex triples with positive orientation in Cartesian coordinates.
    pub triangles: Vec<[usize; 3]>,
}

/// Builds the mesh with the regular diagonal.
pub fn build_mesh<T: Real>(n: usize, l: usize) -> Result<CylinderMesh<T>> {
    CylinderMesh::new(n, l, Diagonal::Regular)
}

impl<T: Real> CylinderMesh<T> {
    pub fn new(n: usize, l: usize, diagonal: Diagonal) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMesh(format!("N must be at least 2, got {n}")));
        }
        if l < 1 {
            return Err(Error::InvalidMesh(format!("L must be at least 1, got {l}")));
        }
        if diagonal == Diagonal::Alternating && !n.is_multiple_of(2) {
            return Err(Error::InvalidMesh("alternating diagonals need an even N".into()));
        }
        let basis = make_honeycomb_basis::<T>();
        let rows = 2 * l * n;
        let nf = T::from_usize_lossy(n);
        let lf = T::from_usize_lossy(l);
        let mut nodes = Vec::with_capacity((n + 1) * (rows + 1));
        for j in 0..=rows {
            for i in 0..=n {
                let tau1 = T::from_usize_lossy(i) / nf;
                let tau2 = -lf + T::from_usize_lossy(j) / nf;
                let class = if j == 0 || j == rows {
                    NodeClass::Dirichlet
                } else if i == 0 {
                    NodeClass::SeamMaster
                } else if i == n {
                    NodeClass::SeamSlave
                } else {
                    NodeClass::Interior
                };
                nodes.push(MeshNode {
                    i,
                    j,
                    tau1,
                    tau2,
                    x: basis.from_lattice_coords(tau1, tau2),
                    class,
                });
            }
        }
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n * rows);
        for j in 0..rows {
            for i in 0..n {
                let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                let flip = diagonal == Diagonal::Alternating && (i + j) % 2 == 1;
                let pair = if flip {
                    [[a, b, d], [b, c, d]]
                } else {
                    [[a, b, c], [a, c, d]]
                };
                for mut t in pair {
                    let area = signed_area(nodes[t[0]].x, nodes[t[1]].x, nodes[t[2]].x);
                    if area < T::zero() {
                        t.swap(1, 2);
                    }
                    triangles.push(t);
                }
            }
        }
        Ok(Self {
            n,
            l,
            diagonal,
            basis,
            nodes,
            triangles,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn diagonal(&self) -> Diagonal {
        self.diagonal
    }

    pub fn basis(&self) -> &LatticeBasis<T> {
        &self.basis
    }

    /// Mesh size `‖v1‖ / N`.
    pub fn h(&self) -> T {
        self.basis.v1.norm() / T::from_usize_lossy(self.n)
    }

    /// Number of node rows along `v2`, minus one (`2LN`).
    pub fn rows(&self) -> usize {
        2 * self.l * self.n
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn vertices(&self, t: usize) -> [Vec2<T>; 3] {
        let tri = self.triangles[t];
        [self.nodes[tri[0]].x, self.nodes[tri[1]].x, self.nodes[tri[2]].x]
    }

    pub fn area(&self, t: usize) -> T {
        let [a, b, c] = self.vertices(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Triangle containing the point with lattice coordinates `(τ1, τ2)`
    /// (τ1 taken modulo 1) and the barycentric coordinates of the point in it.
    pub fn locate(&self, tau1: T, tau2: T) -> (usize, [T; 3]) {
        let nf = T::from_usize_lossy(self.n);
        let t1 = tau1 - tau1.floor();
        let s = t1 * nf;
        let r = (tau2 + T::from_usize_lossy(self.l)) * nf;
        let clamp = |v: T, hi: usize| -> usize {
            let f = v.floor().max(T::zero()).to_usize().unwrap_or(0);
            f.min(hi - 1)
        };
        let i = clamp(s, self.n);
        let j = clamp(r, self.rows());
        let x = self.basis.from_lattice_coords(t1, tau2);
        let first = 2 * (j * self.n + i);
        let mut best = (first, [T::zero(); 3], T::neg_infinity());
        for t in [first, first + 1] {
            let lam = barycentric(self.vertices(t), x);
            let worst = lam.iter().copied().fold(T::infinity(), T::min);
            if worst > best.2 {
                best = (t, lam, worst);
            }
        }
        (best.0, best.1)
    }

    /// Writes the node and triangle tables as two CSV sections.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node_id,tau1,tau2,x,y,class")?;
        for (id, nd) in self.nodes.iter().enumerate() {
            writeln!(
                out,
                "{id},{},{},{},{},{}",
                nd.tau1.to_f64_lossy(),
                nd.tau2.to_f64_lossy(),
                nd.x.x.to_f64_lossy(),
                nd.x.y.to_f64_lossy(),
                nd.class.as_str()
            )?;
        }
        writeln!(out, "tri_id,n0,n1,n2")?;
        for (id, t) in self.triangles.iter().enumerate() {
            writeln!(out, "{id},{},{},{}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

pub(crate) fn signed_area<T: Real>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>) -> T {
    (b - a).cross(c - a) * T::lit(0.5)
}

pub(crate) fn barycentric<T: Real>(v: [Vec2<T>; 3], x: Vec2<T>) -> [T; 3] {
    let total = signed_area(v[0], v[1], v[2]);
    let l0 = signed_area(x, v[1], v[2]) / total;
    let l1 = signed_area(v[0], x, v[2]) / total;
    [l0, l1, T::one() - l0 - l1]
}

/// Gradients of the three P1 basis functions on a triangle.
pub(crate) fn p1_gradients<T: Real>(v: [Vec2<T>; 3]) -> [Vec2<T>; 3] {
    let two_area = (v[1] - v[0]).cross(v[2] - v[0]);
    let grad = |a: Vec2<T>, b: Vec2<T>| Vec2::new(a.y - b.y, b.x - a.x) * (T::one() / two_area);
    [grad(v[1], v[2]), grad(v[2], v[0]), grad(v[0], v[1])]
}

/// Numbering of unknowns.
///
/// Two index spaces are kept:
/// * **dof**: periodic identification plus Dirichlet elimination,
///   `dof = (j − 1)·N + (i mod N)` for `0 < j < 2LN`;
/// * **periodic**: periodic identification only (Dirichlet rows kept),
///   `periodic = j·N + (i mod N)`. Recovery operates in this space.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_dof: usize,
    pub n_periodic: usize,
    pub node_to_dof: Vec<Option<usize>>,
    pub dof_to_node: Vec<usize>,
    pub node_to_periodic: Vec<usize>,
    pub periodic_to_node: Vec<usize>,
    pub periodic_to_dof: Vec<Option<usize>>,
    /// `(slave, master)` geometric node pairs across the seam.
    pub seam_pairs: Vec<(usize, usize)>,
}

pub fn build_dof_map<T: Real>(mesh: &CylinderMesh<T>) -> DofMap {
    let n = mesh.n;
    let rows = mesh.rows();
    let n_periodic = n * (rows + 1);
    let n_dof = n * (rows - 1);
    let mut node_to_dof = vec![None; mesh.nodes.len()];
    let mut node_to_periodic = vec![0; mesh.nodes.len()];
    let mut dof_to_node = vec![0; n_dof];
    let mut periodic_to_node = vec![0; n_periodic];
    let mut periodic_to_dof = vec![None; n_periodic];
    let mut seam_pairs = Vec::with_capacity(rows + 1);
    for (g, nd) in mesh.nodes.iter().enumerate() {
        let im = nd.i % n;
        let p = nd.j * n + im;
        node_to_periodic[g] = p;
        if nd.i < n {
            periodic_to_node[p] = g;
        } else {
            seam_pairs.push((g, mesh.node_index(0, nd.j)));
        }
        if nd.class != NodeClass::Dirichlet {
            let d = (nd.j - 1) * n + im;
            node_to_dof[g] = Some(d);
            if nd.i < n {
                dof_to_node[d] = g;
            }
            periodic_to_dof[p] = Some(d);
        }
    }
    DofMap {
        n_dof,
        n_periodic,
        node_to_dof,
        dof_to_node,
        node_to_periodic,
        periodic_to_node,
        periodic_to_dof,
        seam_pairs,
    }
}

impl DofMap {
    /// Zero-extends a dof vector onto the periodic index space.
    pub fn extend<E: Copy + Zero>(&self, u: &[E]) -> Vec<E> {
        self.periodic_to_dof
            .iter()
            .map(|d| d.map_or_else(E::zero, |d| u[d]))
            .collect()
    }

    /// Restricts a periodic-space vector to the dofs.
    pub fn restrict<E: Copy>(&self, u: &[E]) -> Vec<E> {
        self.dof_to_node.iter().map(|&g| u[self.node_to_periodic[g]]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMember<T> {
    /// Periodic index of the member node.
    pub node: usize,
    /// Position relative to the patch center, in units of `h`.
    pub offset: Vec2<T>,
}

/// Least-squares patch around one node. The center is always the first
/// member. Across the seam members carry their unwrapped position, so one
/// periodic node can appear at more than one offset on very coarse meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePatch<T> {
    pub center: usize,
    pub members: Vec<PatchMember<T>>,
    /// Number of neighbor rings gathered.
    pub rings: usize,
}

impl<T: Real> NodePatch<T> {
    /// Rows `[1, ξ, η, ξ², ξη, η²]` in `h`-scaled local coordinates.
    pub fn vandermonde(&self) -> Vec<[T; 6]> {
        self.members
            .iter()
            .map(|m| {
                let (a, b) = (m.offset.x, m.offset.y);
                [T::one(), a, b, a * a, a * b, b * b]
            })
            .collect()
    }

    /// 2-norm condition number of the quadratic Vandermonde matrix
    /// (infinite when rank deficient).
    pub fn condition_number(&self) -> T {
        let v = self.vandermonde();
        let mut gram = vec![T::zero(); 36];
        for row in &v {
            for a in 0..6 {
                for b in 0..6 {
                    gram[a * 6 + b] = gram[a * 6 + b] + row[a] * row[b];
                }
            }
        }
        let (vals, _) = dense::symmetric_eigen(&gram, 6);
        let lo = vals[0];
        let hi = vals[5];
        if lo <= hi * T::epsilon() * T::lit(64.0) {
            T::infinity()
        } else {
            (hi / lo).sqrt()
        }
    }
}

const MAX_PATCH_COND: f64 = 1e6;

/// Builds one patch per periodic node, including Dirichlet nodes.
///
/// Interior and seam nodes get their first ring; rings are added until the
/// patch has at least six members and a well-conditioned quadratic fit,
/// which only happens next to the Dirichlet boundary.
pub fn build_patches<T: Real>(mesh: &CylinderMesh<T>, map: &DofMap) -> Result<Vec<NodePatch<T>>> {
    let n = mesh.n as i64;
    let rows = mesh.rows() as i64;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); mesh.nodes.len()];
    for tri in &mesh.triangles {
        for a in 0..3 {
            for b in 0..3 {
                if a != b && !adjacency[tri[a]].contains(&tri[b]) {
                    adjacency[tri[a]].push(tri[b]);
                }
            }
        }
    }
    let basis = *mesh.basis();
    let mut patches = Vec::with_capacity(map.n_periodic);
    for p in 0..map.n_periodic {
        let g = map.periodic_to_node[p];
        let (ci, cj) = (mesh.nodes[g].i as i64, mesh.nodes[g].j as i64);
        // BFS over unwrapped lattice positions (iu, j).
        let neighbors = |iu: i64, j: i64| -> Vec<(i64, i64)> {
            let im = iu.rem_euclid(n);
            let shift = iu - im;
            let mut out = Vec::new();
            let mut copies = vec![(im as usize, 0i64)];
            if im == 0 {
                copies.push((n as usize, -n));
            }
            for (gi, off) in copies {
                let gnode = mesh.node_index(gi, j as usize);
                for &nb in &adjacency[gnode] {
                    let nd = &mesh.nodes[nb];
                    out.push((nd.i as i64 + off + shift, nd.j as i64));
                }
            }
            out
        };
        let mut seen: HashMap<(i64, i64), usize> = HashMap::new();
        seen.insert((ci, cj), 0);
        let mut order = vec![(ci, cj)];
        let mut frontier = VecDeque::from([(ci, cj)]);
        let mut rings = 0;
        let patch = loop {
            let mut next = VecDeque::new();
            while let Some((iu, j)) = frontier.pop_front() {
                for nb in neighbors(iu, j) {
                    if nb.1 < 0 || nb.1 > rows || seen.contains_key(&nb) {
                        continue;
                    }
                    seen.insert(nb, rings + 1);
                    order.push(nb);
                    next.push_back(nb);
                }
            }
            rings += 1;
            let members = order
                .iter()
                .map(|&(iu, j)| PatchMember {
                    node: (j * n + iu.rem_euclid(n)) as usize,
                    offset: basis.from_lattice_coords(T::lit((iu - ci) as f64), T::lit((j - cj) as f64)),
                })
                .collect();
            let patch = NodePatch {
                center: p,
                members,
                rings,
            };
            if patch.members.len() >= 6 && patch.condition_number() < T::lit(MAX_PATCH_COND) {
                break patch;
            }
            if next.is_empty() || rings > 4 {
                return Err(Error::RankDeficientPatch { node: p });
            }
            frontier = next;
        };
        patches.push(patch);
    }
    Ok(patches)
}
