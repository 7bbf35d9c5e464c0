//! Longest-edge bisection on an integer lattice.
//!
//! Vertices live on a lattice with `2^SUB_BITS` subdivisions per background
//! cell, so midpoints are exact and wall membership is an integer test.
//! Edges lying in the wall `x1 = 0` are always bisected together with their
//! translate on `x1 = 1`, which keeps the two wall triangulations identical.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::MeshError;

pub(crate) const SUB_BITS: u32 = 32;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Lattice {
    /// Lattice extent per axis; coordinates range over `0..=imax[a]`.
    pub imax: [i64; 3],
    /// Physical length of one lattice unit per axis.
    pub unit: [f64; 3],
    pub extent: [f64; 3],
}

impl Lattice {
    pub fn new(cells: [i64; 3], extent: [f64; 3]) -> Self {
        let sub = 1i64 << SUB_BITS;
        let imax = [cells[0] * sub, cells[1] * sub, cells[2] * sub];
        let unit = [
            extent[0] / imax[0] as f64,
            extent[1] / imax[1] as f64,
            extent[2] / imax[2] as f64,
        ];
        Lattice { imax, unit, extent }
    }

    /// Physical position; `x3` runs from `-depth` (k = 0) to exactly 0 (k = imax).
    pub fn physical(&self, p: [i64; 3]) -> [f64; 3] {
        [
            p[0] as f64 / self.imax[0] as f64 * self.extent[0],
            p[1] as f64 / self.imax[1] as f64 * self.extent[1],
            (p[2] as f64 / self.imax[2] as f64 - 1.0) * self.extent[2],
        ]
    }

    fn reduced(&self, p: [i64; 3]) -> [i64; 3] {
        if p[0] == self.imax[0] {
            [0, p[1], p[2]]
        } else {
            p
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct EdgeKey {
    len2: f64,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl EdgeKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len2
            .total_cmp(&other.len2)
            .then_with(|| self.lo.cmp(&other.lo))
            .then_with(|| self.hi.cmp(&other.hi))
    }
}

fn pack(a: u32, b: u32) -> u64 {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    ((a as u64) << 32) | b as u64
}

fn unpack(e: u64) -> (u32, u32) {
    ((e >> 32) as u32, e as u32)
}

const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub(crate) struct Refiner<'a> {
    pub lat: Lattice,
    pub verts: Vec<[i64; 3]>,
    vmap: HashMap<[i64; 3], u32>,
    dist: Vec<f64>,
    pub tets: Vec<[u32; 4]>,
    edges: HashMap<u64, Vec<u32>>,
    distance: Box<dyn Fn([f64; 3]) -> f64 + 'a>,
}

impl<'a> Refiner<'a> {
    /// Structured background: every lattice cell split into the six tetrahedra
    /// sharing one of its diagonals.
    pub fn structured(cells: [i64; 3], extent: [f64; 3], distance: Box<dyn Fn([f64; 3]) -> f64 + 'a>) -> Self {
        let lat = Lattice::new(cells, extent);
        let sub = 1i64 << SUB_BITS;
        let mut r = Refiner {
            lat,
            verts: Vec::new(),
            vmap: HashMap::new(),
            dist: Vec::new(),
            tets: Vec::new(),
            edges: HashMap::new(),
            distance,
        };
        for i in 0..=cells[0] {
            for j in 0..=cells[1] {
                for k in 0..=cells[2] {
                    r.add_vertex([i * sub, j * sub, k * sub]);
                }
            }
        }
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for i in 0..cells[0] {
            for j in 0..cells[1] {
                for k in 0..cells[2] {
                    // Kuhn cube mirrored along every axis with odd index: conforming, and
                    // invariant under x_a -> L_a - x_a when the cell counts are even
                    let idx = [i, j, k];
                    let start: [i64; 3] = std::array::from_fn(|a| (idx[a] + (idx[a] & 1)) * sub);
                    let step: [i64; 3] = std::array::from_fn(|a| if idx[a] & 1 == 1 { -sub } else { sub });
                    for p in perms {
                        let mut c = start;
                        let mut tet = [0u32; 4];
                        tet[0] = r.vmap[&c];
                        for (s, &axis) in p.iter().enumerate() {
                            c[axis] += step[axis];
                            tet[s + 1] = r.vmap[&c];
                        }
                        if r.orient(tet) < 0 {
                            tet.swap(2, 3);
                        }
                        r.push_tet(tet);
                    }
                }
            }
        }
        r
    }

    fn add_vertex(&mut self, p: [i64; 3]) -> u32 {
        let id = self.verts.len() as u32;
        self.verts.push(p);
        self.vmap.insert(p, id);
        let d = (self.distance)(self.lat.physical(p));
        self.dist.push(d);
        id
    }

    fn push_tet(&mut self, t: [u32; 4]) {
        let id = self.tets.len() as u32;
        self.tets.push(t);
        for (a, b) in TET_EDGES {
            self.edges.entry(pack(t[a], t[b])).or_default().push(id);
        }
    }

    /// Sign of the lattice volume, computed in exact integer arithmetic.
    fn orient(&self, t: [u32; 4]) -> i32 {
        let p0 = self.verts[t[0] as usize];
        let d = |v: u32| {
            let p = self.verts[v as usize];
            [(p[0] - p0[0]) as i128, (p[1] - p0[1]) as i128, (p[2] - p0[2]) as i128]
        };
        let (a, b, c) = (d(t[1]), d(t[2]), d(t[3]));
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        det.signum() as i32
    }

    fn edge_key(&self, a: u32, b: u32) -> EdgeKey {
        let pa = self.verts[a as usize];
        let pb = self.verts[b as usize];
        let mut sq = [0.0f64; 3];
        for ax in 0..3 {
            let d = (pa[ax] - pb[ax]) as f64 * self.lat.unit[ax];
            sq[ax] = d * d;
        }
        sq.sort_by(|x, y| x.total_cmp(y));
        let ra = self.lat.reduced(pa);
        let rb = self.lat.reduced(pb);
        let (lo, hi) = if ra <= rb { (ra, rb) } else { (rb, ra) };
        EdgeKey { len2: sq[0] + sq[1] + sq[2], lo, hi }
    }

    fn longest(&self, t: u32) -> (u64, f64) {
        let tet = self.tets[t as usize];
        let mut best: Option<(u64, EdgeKey)> = None;
        for (a, b) in TET_EDGES {
            let k = self.edge_key(tet[a], tet[b]);
            if best.as_ref().is_none_or(|(_, bk)| k.cmp(bk) == Ordering::Greater) {
                best = Some((pack(tet[a], tet[b]), k));
            }
        }
        let (e, k) = best.expect("tet has edges");
        (e, k.len2)
    }

    /// Translate of a wall edge on the opposite wall, if the edge lies in a wall.
    fn mirror(&self, e: u64) -> Option<u64> {
        let (a, b) = unpack(e);
        let pa = self.verts[a as usize];
        let pb = self.verts[b as usize];
        let imax = self.lat.imax[0];
        let target = if pa[0] == 0 && pb[0] == 0 {
            imax
        } else if pa[0] == imax && pb[0] == imax {
            0
        } else {
            return None;
        };
        let ma = self.vmap[&[target, pa[1], pa[2]]];
        let mb = self.vmap[&[target, pb[1], pb[2]]];
        Some(pack(ma, mb))
    }

    fn bisect(&mut self, e: u64) -> Result<(), MeshError> {
        let (a, b) = unpack(e);
        let pa = self.verts[a as usize];
        let pb = self.verts[b as usize];
        let mut pm = [0i64; 3];
        for ax in 0..3 {
            let s = pa[ax] + pb[ax];
            if s % 2 != 0 {
                return Err(MeshError::ApertureUnresolvable(
                    "refinement exceeded lattice resolution".into(),
                ));
            }
            pm[ax] = s / 2;
        }
        let m = self.add_vertex(pm);
        let incident = self.edges.remove(&e).unwrap_or_default();
        for t in incident {
            let tet = self.tets[t as usize];
            let ia = tet.iter().position(|&v| v == a).expect("edge vertex in tet");
            let ib = tet.iter().position(|&v| v == b).expect("edge vertex in tet");
            let others: Vec<u32> = tet.iter().copied().filter(|&v| v != a && v != b).collect();
            let (c, d) = (others[0], others[1]);
            let mut t1 = tet;
            t1[ib] = m;
            let mut t2 = tet;
            t2[ia] = m;
            let t2id = self.tets.len() as u32;
            self.tets[t as usize] = t1;
            self.tets.push(t2);
            for v in [c, d] {
                let list = self.edges.get_mut(&pack(b, v)).expect("edge present");
                let pos = list.iter().position(|&x| x == t).expect("tet on edge");
                list[pos] = t2id;
            }
            self.edges.get_mut(&pack(c, d)).expect("edge present").push(t2id);
            self.edges.entry(pack(a, m)).or_default().push(t);
            self.edges.entry(pack(m, b)).or_default().push(t2id);
            for v in [c, d] {
                let list = self.edges.entry(pack(m, v)).or_default();
                list.push(t);
                list.push(t2id);
            }
        }
        Ok(())
    }

    /// Bisect `e` (and its wall translate) after first refining every incident
    /// tetrahedron whose longest edge is a different one.
    fn refine_edge(&mut self, e: u64) -> Result<(), MeshError> {
        let mut stack = vec![e];
        'outer: while let Some(&top) = stack.last() {
            if !self.edges.contains_key(&top) {
                stack.pop();
                continue;
            }
            let mut group = vec![top];
            if let Some(m) = self.mirror(top) {
                if m != top {
                    group.push(m);
                }
            }
            for &g in &group {
                for &t in &self.edges[&g] {
                    let (l, _) = self.longest(t);
                    if l != g {
                        stack.push(l);
                        continue 'outer;
                    }
                }
            }
            stack.pop();
            for g in group {
                self.bisect(g)?;
            }
        }
        Ok(())
    }

    /// Bisect until every tetrahedron satisfies `diam <= target(d)`, where `d`
    /// is a lower bound on its distance to the aperture sets.
    pub fn refine_to(&mut self, target: &dyn Fn(f64) -> f64, max_tets: usize) -> Result<(), MeshError> {
        loop {
            let mut changed = false;
            let mut t = 0usize;
            while t < self.tets.len() {
                loop {
                    let (e, len2) = self.longest(t as u32);
                    let diam = len2.sqrt();
                    let tet = self.tets[t];
                    let dmax = tet.iter().map(|&v| self.dist[v as usize]).fold(0.0, f64::max);
                    let d = (dmax - diam).max(0.0);
                    if diam <= target(d) * (1.0 + 1e-12) {
                        break;
                    }
                    self.refine_edge(e)?;
                    changed = true;
                    if self.tets.len() > max_tets {
                        return Err(MeshError::TooLarge(max_tets));
                    }
                }
                t += 1;
            }
            if !changed {
                return Ok(());
            }
        }
    }

    pub fn vertex_id(&self, p: [i64; 3]) -> Option<u32> {
        self.vmap.get(&p).copied()
    }

    /// Volume sign check used by tests.
    #[cfg(test)]
    pub fn all_positive(&self) -> bool {
        self.tets.iter().all(|&t| self.orient(t) > 0)
    }
}
