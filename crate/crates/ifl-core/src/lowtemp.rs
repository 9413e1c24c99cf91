//! Low-temperature expansion: source-constrained even subgraphs, their
//! weights, the spin/edge bijection and exact or Monte Carlo spin sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{
    corner_face, corner_weight, half_edge_weight, BoundaryConditions, Domain, Point, Site, Stub,
    X_CRIT,
};
use crate::{IflError, Result};

/// Default exhaustive-mode cap on lattice edges.
pub const DEFAULT_EDGE_CAP: usize = 36;
/// Largest face count for which sampling enumerates all spin configurations.
pub const EXACT_SAMPLING_FACES: usize = 20;
/// Largest face count for Gray-code spin sums on non-rectangular domains.
pub const SPIN_SUM_FACES: usize = 30;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Endpoint of a configuration: a lattice vertex or a decorated site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Vertex(usize),
    Site(Site),
}

/// A decorated-edge configuration: full lattice edges plus the decorated
/// edges (half-edges, corner edges or outer normals) ending at the sources.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeConfig {
    pub lattice: u128,
    /// `(vertex, direction)` of each decorated stub.
    pub stubs: Vec<(usize, u8)>,
}

impl EdgeConfig {
    pub fn contains(&self, e: usize) -> bool {
        self.lattice >> e & 1 == 1
    }

    pub fn edge_count(&self) -> u32 {
        self.lattice.count_ones()
    }
}

/// Exhaustive enumerator over the affine space of configurations with a
/// prescribed odd-degree set, walked in Gray-code order over face cycles.
#[derive(Clone, Debug)]
pub struct Enumerator<'a> {
    dom: &'a Domain,
    free: Vec<bool>,
    nonfree: u128,
    face_masks: Vec<u128>,
    parent: Vec<Option<(usize, usize)>>,
    xpow: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    pub fn new(dom: &'a Domain, free: &[bool], cap: usize) -> Result<Self> {
        let ne = dom.edges().len();
        let limit = cap.min(128);
        if ne > limit {
            return Err(IflError::TooLarge {
                what: "edge set",
                size: ne,
                cap: limit,
            });
        }
        if free.len() != ne {
            return Err(IflError::InvalidArgument("free mask length".into()));
        }
        let mut nonfree = 0u128;
        for (e, &f) in free.iter().enumerate() {
            if !f {
                nonfree |= 1 << e;
            }
        }
        let face_masks = (0..dom.faces().len())
            .map(|f| dom.face_edges(f).iter().fold(0u128, |m, &e| m | 1 << e))
            .collect();
        let nv = dom.vertices().len();
        let mut parent = vec![None; nv];
        let mut seen = vec![false; nv];
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for d in [0u8, 2, 4, 6] {
                if let Some(e) = dom.edge_from(v, d) {
                    let w = dom.edges()[e].other(v);
                    if !seen[w] {
                        seen[w] = true;
                        parent[w] = Some((v, e));
                        queue.push_back(w);
                    }
                }
            }
        }
        let xpow = (0..=128).map(|c| X_CRIT.powi(c)).collect();
        Ok(Enumerator {
            dom,
            free: free.to_vec(),
            nonfree,
            face_masks,
            parent,
            xpow,
        })
    }

    pub fn with_bc(dom: &'a Domain, bc: &BoundaryConditions) -> Result<Self> {
        Self::new(dom, &bc.free_mask(dom), DEFAULT_EDGE_CAP)
    }

    pub fn domain(&self) -> &'a Domain {
        self.dom
    }

    pub fn is_free(&self, e: usize) -> bool {
        self.free[e]
    }

    pub fn xpow(&self, c: u32) -> f64 {
        self.xpow[c as usize]
    }

    /// Weight of the decorated edge leaving `v` in direction `d`.
    pub fn stub_weight(&self, v: usize, d: u8) -> f64 {
        if d % 2 == 1 {
            return corner_weight();
        }
        match self.dom.stub(v, d) {
            Some(Stub::Half(e)) if self.free[e] => 1.0,
            _ => half_edge_weight(),
        }
    }

    /// Lattice edges whose odd-degree vertices are exactly those flagged in `odd`.
    pub fn particular(&self, odd: &[bool]) -> u128 {
        let mut mask = 0u128;
        for (v, &o) in odd.iter().enumerate() {
            if !o {
                continue;
            }
            let mut u = v;
            while let Some((p, e)) = self.parent[u] {
                mask ^= 1 << e;
                u = p;
            }
        }
        mask
    }

    /// Visits `base` xor every combination of face cycles, with the count of
    /// non-free edges in each set.
    pub fn walk(&self, base: u128, mut f: impl FnMut(u128, u32)) {
        let mut mask = base;
        f(mask, (mask & self.nonfree).count_ones());
        let total: u64 = 1 << self.face_masks.len();
        for i in 1..total {
            mask ^= self.face_masks[i.trailing_zeros() as usize];
            f(mask, (mask & self.nonfree).count_ones());
        }
    }

    pub fn config_count(&self) -> u64 {
        1 << self.face_masks.len()
    }

    /// Calls `f` with every configuration for the given sources and its weight.
    pub fn for_each_config(
        &self,
        sources: &[Source],
        mut f: impl FnMut(&EdgeConfig, f64),
    ) -> Result<()> {
        let dom = self.dom;
        let nv = dom.vertices().len();
        let mut seen = std::collections::HashSet::new();
        let mut odd = vec![false; nv];
        let mut stubs = Vec::new();
        let mut mids = Vec::new();
        let mut fixed = 1.0;
        for &s in sources {
            if !seen.insert(s) {
                return Err(IflError::InvalidArgument(format!("repeated source {s:?}")));
            }
            match s {
                Source::Vertex(v) => {
                    if v >= nv {
                        return Err(IflError::InvalidArgument(format!("no vertex {v}")));
                    }
                    odd[v] ^= true;
                }
                Source::Site(Site::Mid(e)) => {
                    let edge = *dom
                        .edges()
                        .get(e)
                        .ok_or_else(|| IflError::InvalidArgument(format!("no edge {e}")))?;
                    odd[edge.from] ^= true;
                    fixed *= self.stub_weight(edge.from, edge.dir);
                    mids.push(e);
                }
                Source::Site(site) => {
                    let (v, d) = checked_anchor(dom, site)?;
                    odd[v] ^= true;
                    fixed *= self.stub_weight(v, d);
                    stubs.push((v, d));
                }
            }
        }
        if sources.len() % 2 == 1 {
            return Err(IflError::InvalidArgument("odd number of sources".into()));
        }
        let base = self.particular(&odd);
        let mut cfg = EdgeConfig {
            lattice: 0,
            stubs: stubs.clone(),
        };
        self.walk(base, |mask, count| {
            let mut lattice = mask;
            let mut c = count;
            cfg.stubs.truncate(stubs.len());
            for &e in &mids {
                let edge = dom.edges()[e];
                if mask >> e & 1 == 1 {
                    lattice ^= 1 << e;
                    if !self.free[e] {
                        c -= 1;
                    }
                    cfg.stubs.push((edge.to, edge.dir + 4));
                } else {
                    cfg.stubs.push((edge.from, edge.dir));
                }
            }
            cfg.lattice = lattice;
            f(&cfg, fixed * self.xpow[c as usize]);
        });
        Ok(())
    }

    pub fn configs(&self, sources: &[Source]) -> Result<Vec<EdgeConfig>> {
        let mut out = Vec::new();
        self.for_each_config(sources, |c, _| out.push(c.clone()))?;
        Ok(out)
    }

    pub fn partition_function(&self, sources: &[Source]) -> Result<f64> {
        let mut z = KahanSum::default();
        self.for_each_config(sources, |_, w| z.add(w))?;
        Ok(z.value())
    }
}

fn checked_anchor(dom: &Domain, site: Site) -> Result<(usize, u8)> {
    let ok = match site {
        Site::Corner { vertex, dir } => {
            vertex < dom.vertices().len()
                && dir % 2 == 1
                && dom.has_face(corner_face(dom.vertices()[vertex], dir))
        }
        Site::Normal(n) => n < dom.normals().len(),
        Site::Mid(e) => e < dom.edges().len(),
    };
    if !ok {
        return Err(IflError::InvalidArgument(format!("no site {site:?}")));
    }
    Ok(dom.site_anchor(site))
}

/// Z for a domain with boundary conditions and decorated sources.
pub fn partition_function(
    dom: &Domain,
    bc: &BoundaryConditions,
    sources: &[Source],
) -> Result<f64> {
    Enumerator::with_bc(dom, bc)?.partition_function(sources)
}

/// Spins of the outer faces across boundary edges (free arcs carry their
/// assigned spin) and which boundary edges are free.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinBoundary {
    pub outer: Vec<Option<i8>>,
    pub free: Vec<bool>,
}

impl SpinBoundary {
    pub fn from_bc(dom: &Domain, bc: &BoundaryConditions) -> Self {
        SpinBoundary {
            outer: (0..dom.edges().len()).map(|e| bc.outer_spin(e)).collect(),
            free: bc.free_mask(dom),
        }
    }

    /// Every boundary edge carries the same fixed spin.
    pub fn uniform(dom: &Domain, spin: i8) -> Self {
        SpinBoundary {
            outer: (0..dom.edges().len())
                .map(|e| dom.is_boundary_edge(e).then_some(spin))
                .collect(),
            free: vec![false; dom.edges().len()],
        }
    }

    pub fn all_free(dom: &Domain) -> Self {
        let mut sb = Self::uniform(dom, 1);
        sb.free = (0..dom.edges().len()).map(|e| dom.is_boundary_edge(e)).collect();
        sb
    }

    /// Outer spin that interacts across edge `e`.
    pub fn coupling(&self, e: usize) -> Option<i8> {
        if self.free[e] {
            None
        } else {
            self.outer[e]
        }
    }
}

/// Boltzmann weight x^(number of unequal neighbouring pairs across non-free edges).
pub fn spin_weight(dom: &Domain, sb: &SpinBoundary, spins: &[i8]) -> f64 {
    X_CRIT.powi(spin_disagreements(dom, sb, spins) as i32)
}

fn spin_disagreements(dom: &Domain, sb: &SpinBoundary, spins: &[i8]) -> u32 {
    let mut c = 0;
    for e in 0..dom.edges().len() {
        match dom.edge_faces(e) {
            [Some(l), Some(r)] => c += u32::from(spins[l] != spins[r]),
            [Some(f), None] | [None, Some(f)] => {
                if let Some(s) = sb.coupling(e) {
                    c += u32::from(spins[f] != s);
                }
            }
            [None, None] => {}
        }
    }
    c
}

/// Lattice edges separating unequal spins, with free arcs read through their assigned spins.
pub fn spins_to_edges(dom: &Domain, sb: &SpinBoundary, spins: &[i8]) -> Result<Vec<bool>> {
    check_spins(dom, spins)?;
    Ok((0..dom.edges().len())
        .map(|e| match dom.edge_faces(e) {
            [Some(l), Some(r)] => spins[l] != spins[r],
            [Some(f), None] | [None, Some(f)] => {
                Some(spins[f]) != sb.outer[e]
            }
            [None, None] => false,
        })
        .collect())
}

pub fn edges_to_spins(dom: &Domain, sb: &SpinBoundary, edges: &[bool]) -> Result<Vec<i8>> {
    let nf = dom.faces().len();
    if edges.len() != dom.edges().len() {
        return Err(IflError::InvalidArgument("edge set length".into()));
    }
    let mut spins = vec![0i8; nf];
    let mut queue = std::collections::VecDeque::new();
    let e = dom.boundary()[0].out_edge;
    let f = dom.edge_faces(e)[0].expect("boundary edge has an inner face on its left");
    let out = sb.outer[e]
        .ok_or_else(|| IflError::InvalidArgument("boundary edge without outer spin".into()))?;
    spins[f] = if edges[e] { -out } else { out };
    queue.push_back(f);
    while let Some(f) = queue.pop_front() {
        for e in dom.face_edges(f) {
            if let [Some(l), Some(r)] = dom.edge_faces(e) {
                let g = if l == f { r } else { l };
                if spins[g] == 0 {
                    spins[g] = if edges[e] { -spins[f] } else { spins[f] };
                    queue.push_back(g);
                }
            }
        }
    }
    if spins_to_edges(dom, sb, &spins)? != edges {
        return Err(IflError::InvalidArgument(
            "edge set is not the interface set of any spin configuration".into(),
        ));
    }
    Ok(spins)
}

fn check_spins(dom: &Domain, spins: &[i8]) -> Result<()> {
    if spins.len() != dom.faces().len() || spins.iter().any(|&s| s != 1 && s != -1) {
        return Err(IflError::InvalidArgument("spins must be +-1 on every face".into()));
    }
    Ok(())
}

fn rect_dims(dom: &Domain) -> Option<(usize, usize)> {
    let f = dom.faces();
    let w = f.iter().map(|p| p.0).max()? - f.iter().map(|p| p.0).min()? + 1;
    let h = f.iter().map(|p| p.1).max()? - f.iter().map(|p| p.1).min()? + 1;
    (usize::try_from(w * h).ok()? == f.len()).then_some((w as usize, h as usize))
}

/// Spin partition function Σσ x^(disagreements), by transfer matrix on
/// rectangles and by Gray-code enumeration otherwise.
pub fn spin_partition(dom: &Domain, sb: &SpinBoundary) -> Result<f64> {
    match rect_dims(dom) {
        Some((w, _)) if w <= 14 => Ok(transfer_matrix(dom, sb)),
        _ => spin_partition_enum(dom, sb),
    }
}

pub fn spin_partition_enum(dom: &Domain, sb: &SpinBoundary) -> Result<f64> {
    let nf = dom.faces().len();
    if nf > SPIN_SUM_FACES {
        return Err(IflError::TooLarge {
            what: "face set",
            size: nf,
            cap: SPIN_SUM_FACES,
        });
    }
    let mut z = KahanSum::default();
    for_each_spin_config(dom, sb, |_, w| z.add(w));
    Ok(z.value())
}

/// Visits all spin configurations in Gray-code order with their weights.
pub fn for_each_spin_config(dom: &Domain, sb: &SpinBoundary, mut f: impl FnMut(&[i8], f64)) {
    let nf = dom.faces().len();
    let mut spins = vec![1i8; nf];
    let mut c = spin_disagreements(dom, sb, &spins) as i64;
    let xpow: Vec<f64> = (0..=4 * nf as i32 + 4).map(|k| X_CRIT.powi(k)).collect();
    f(&spins, xpow[c as usize]);
    let total: u64 = 1 << nf;
    for i in 1..total {
        let face = i.trailing_zeros() as usize;
        c += flip_delta(dom, sb, &spins, face);
        spins[face] = -spins[face];
        f(&spins, xpow[c as usize]);
    }
}

fn flip_delta(dom: &Domain, sb: &SpinBoundary, spins: &[i8], face: usize) -> i64 {
    let s = spins[face];
    let mut delta = 0i64;
    for e in dom.face_edges(face) {
        let other = match dom.edge_faces(e) {
            [Some(l), Some(r)] => Some(if l == face { spins[r] } else { spins[l] }),
            _ => sb.coupling(e),
        };
        if let Some(o) = other {
            delta += if o == s { 1 } else { -1 };
        }
    }
    delta
}

fn transfer_matrix(dom: &Domain, sb: &SpinBoundary) -> f64 {
    let (w, h) = rect_dims(dom).expect("rectangular domain");
    let (x0, y0) = dom.faces()[0];
    let vid = |x: usize, y: usize| {
        dom.vertex_id((x0 + x as i32, y0 + y as i32))
            .expect("rectangle vertex")
    };
    let states = 1usize << w;
    let xp: Vec<f64> = (0..=2 * w + 4).map(|k| X_CRIT.powi(k as i32)).collect();
    let row_weight = |y: usize, s: usize| -> f64 {
        let spin = |x: usize| if s >> x & 1 == 1 { -1i8 } else { 1 };
        let mut c = ((s ^ (s >> 1)) & ((1 << (w - 1)) - 1)).count_ones() as usize;
        let mut side = |e: usize, x: usize| {
            if let Some(o) = sb.coupling(e) {
                c += usize::from(o != spin(x));
            }
        };
        side(dom.edge_from(vid(0, y), 2).expect("left edge"), 0);
        side(dom.edge_from(vid(w, y), 2).expect("right edge"), w - 1);
        if y == 0 {
            for x in 0..w {
                side(dom.edge_from(vid(x, 0), 0).expect("bottom edge"), x);
            }
        }
        if y == h - 1 {
            for x in 0..w {
                side(dom.edge_from(vid(x, h), 0).expect("top edge"), x);
            }
        }
        xp[c]
    };
    let mut v: Vec<f64> = (0..states).map(|s| row_weight(0, s)).collect();
    for y in 1..h {
        let mut next = vec![0.0; states];
        for (s, slot) in next.iter_mut().enumerate() {
            let mut acc = KahanSum::default();
            for (t, &vt) in v.iter().enumerate() {
                acc.add(vt * xp[(s ^ t).count_ones() as usize]);
            }
            *slot = acc.value() * row_weight(y, s);
        }
        v = next;
    }
    let mut z = KahanSum::default();
    for val in v {
        z.add(val);
    }
    z.value()
}

/// How a batch of samples was produced.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplingMethod {
    Exact,
    Metropolis { burn_in_sweeps: usize, thinning_sweeps: usize },
}

#[derive(Clone, Debug)]
pub struct SpinSamples {
    pub samples: Vec<Vec<i8>>,
    pub method: SamplingMethod,
}

pub const DEFAULT_BURN_IN_SWEEPS: usize = 2000;
pub const DEFAULT_THINNING_SWEEPS: usize = 10;

/// Samples spin configurations; exact under the face cap, Metropolis beyond.
pub fn sample_spins(
    dom: &Domain,
    sb: &SpinBoundary,
    count: usize,
    seed: u64,
) -> Result<SpinSamples> {
    if count == 0 {
        return Err(IflError::InvalidArgument("count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = dom.faces().len();
    if nf <= EXACT_SAMPLING_FACES {
        let mut cumulative = Vec::with_capacity(1 << nf);
        let mut acc = KahanSum::default();
        for_each_spin_config(dom, sb, |_, w| {
            acc.add(w);
            cumulative.push(acc.value());
        });
        let total = acc.value();
        let samples = (0..count)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                gray_spins(nf, idx as u64)
            })
            .collect();
        return Ok(SpinSamples {
            samples,
            method: SamplingMethod::Exact,
        });
    }
    metropolis(
        dom,
        sb,
        count,
        DEFAULT_BURN_IN_SWEEPS,
        DEFAULT_THINNING_SWEEPS,
        &mut rng,
    )
}

/// Spins after `idx` steps of the face Gray code starting from all plus.
fn gray_spins(nf: usize, idx: u64) -> Vec<i8> {
    let g = idx ^ (idx >> 1);
    (0..nf).map(|f| if g >> f & 1 == 1 { -1 } else { 1 }).collect()
}

pub fn metropolis(
    dom: &Domain,
    sb: &SpinBoundary,
    count: usize,
    burn_in_sweeps: usize,
    thinning_sweeps: usize,
    rng: &mut impl Rng,
) -> Result<SpinSamples> {
    let nf = dom.faces().len();
    let mut spins = vec![1i8; nf];
    let accept: Vec<f64> = (-4..=4).map(|d: i32| X_CRIT.powi(d.max(0))).collect();
    for _ in 0..burn_in_sweeps {
        sweep(dom, sb, &accept, &mut spins, rng);
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..thinning_sweeps.max(1) {
            sweep(dom, sb, &accept, &mut spins, rng);
        }
        samples.push(spins.clone());
    }
    Ok(SpinSamples {
        samples,
        method: SamplingMethod::Metropolis {
            burn_in_sweeps,
            thinning_sweeps,
        },
    })
}

fn sweep(dom: &Domain, sb: &SpinBoundary, accept: &[f64], spins: &mut [i8], rng: &mut impl Rng) {
    let nf = spins.len();
    for _ in 0..nf {
        let f = rng.random_range(0..nf);
        let d = flip_delta(dom, sb, spins, f);
        if d <= 0 || rng.random::<f64>() < accept[(d + 4) as usize] {
            spins[f] = -spins[f];
        }
    }
}

/// Boundary edges of each wired arc `[x_{2i-1}, x_{2i}]`, walking
/// counterclockwise. `points` are boundary vertices listed counterclockwise.
pub fn wired_arc_edges(dom: &Domain, points: &[Point]) -> Result<Vec<Vec<usize>>> {
    if points.len() < 2 || points.len() % 2 == 1 {
        return Err(IflError::InvalidBc(format!(
            "need an even number of marked points, got {}",
            points.len()
        )));
    }
    let len = dom.boundary().len();
    let idx = points
        .iter()
        .map(|&p| {
            dom.vertex_id(p)
                .and_then(|v| dom.boundary_index_of_vertex(v))
                .ok_or_else(|| IflError::InvalidBc(format!("{p:?} is not a boundary vertex")))
        })
        .collect::<Result<Vec<_>>>()?;
    let offset: Vec<usize> = idx.iter().map(|&i| (i + len - idx[0]) % len).collect();
    if offset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IflError::InvalidBc(
            "marked points must be distinct and listed counterclockwise".into(),
        ));
    }
    Ok(idx
        .chunks(2)
        .map(|pair| {
            let steps = (pair[1] + len - pair[0]) % len;
            (0..steps)
                .map(|s| dom.boundary()[(pair[0] + s) % len].out_edge)
                .collect()
        })
        .collect())
}

/// Arc `i` carries the outer spin `sigma[i]`; every other boundary edge is free.
pub fn monochromatic_boundary(dom: &Domain, arcs: &[Vec<usize>], sigma: &[i8]) -> SpinBoundary {
    let ne = dom.edges().len();
    let mut sb = SpinBoundary {
        outer: (0..ne).map(|e| dom.is_boundary_edge(e).then_some(1)).collect(),
        free: (0..ne).map(|e| dom.is_boundary_edge(e)).collect(),
    };
    for (arc, &s) in arcs.iter().zip(sigma) {
        for &e in arc {
            sb.outer[e] = Some(s);
            sb.free[e] = false;
        }
    }
    sb
}

/// Restricted partition functions `Z_σ` of the monochromatic model for all
/// `σ ∈ {±1}^k`, indexed by the bit pattern (bit `i` set means `σ_i = -1`).
pub fn restricted_partitions(dom: &Domain, points: &[Point]) -> Result<Vec<f64>> {
    let arcs = wired_arc_edges(dom, points)?;
    let k = arcs.len();
    (0..1usize << k)
        .map(|bits| {
            let sigma = sigma_from_bits(bits, k);
            spin_partition(dom, &monochromatic_boundary(dom, &arcs, &sigma))
        })
        .collect()
}

pub fn sigma_from_bits(bits: usize, k: usize) -> Vec<i8> {
    (0..k).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect()
}

/// `E[σ_{i_1} ⋯ σ_{i_r}]` with the spin of arc `i_1` pinned to `+1`,
/// assembled from restricted sums. Indices are 0-based.
pub fn spin_correlation_from_sums(z: &[f64], k: usize, subset: &[usize]) -> Result<f64> {
    check_subset(k, subset)?;
    let pinned = subset[0];
    let (mut num, mut den) = (KahanSum::default(), KahanSum::default());
    for (bits, &zs) in z.iter().enumerate() {
        if bits >> pinned & 1 == 1 {
            continue;
        }
        let sign = subset.iter().filter(|&&i| bits >> i & 1 == 1).count() % 2;
        num.add(if sign == 0 { zs } else { -zs });
        den.add(zs);
    }
    Ok(num.value() / den.value())
}

pub fn check_subset(k: usize, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(IflError::InvalidArgument("arc subset is empty".into()));
    }
    let mut seen = vec![false; k];
    for &i in subset {
        if i >= k || std::mem::replace(&mut seen[i], true) {
            return Err(IflError::InvalidArgument(format!(
                "arc subset {subset:?} must hold distinct indices below {k}"
            )));
        }
    }
    Ok(())
}

/// Spin correlation of the wired arcs in `subset` under the Edwards–Sokal
/// coupling with free boundary between the arcs.
pub fn fk_crossing_exact(dom: &Domain, points: &[Point], subset: &[usize]) -> Result<f64> {
    let z = restricted_partitions(dom, points)?;
    spin_correlation_from_sums(&z, points.len() / 2, subset)
}

/// Probability that the wired arcs in `subset` lie in one FK cluster. For
/// one or two arcs this is the spin correlation; for more arcs the
/// correlations do not determine it.
pub fn same_cluster_probability(dom: &Domain, points: &[Point], subset: &[usize]) -> Result<f64> {
    if subset.len() > 2 {
        return Err(IflError::InvalidArgument(
            "same-cluster probability is only determined for one or two arcs".into(),
        ));
    }
    fk_crossing_exact(dom, points, subset)
}

/// Whether faces of sign `sign` connect a face on `from` to a face on `to`
/// (boundary edge lists), diagonal steps allowed.
pub fn spin_crossing(dom: &Domain, spins: &[i8], from: &[usize], to: &[usize], sign: i8) -> bool {
    let inner_face = |e: usize| match dom.edge_faces(e) {
        [Some(f), None] | [None, Some(f)] => Some(f),
        _ => None,
    };
    let index: std::collections::HashMap<Point, usize> =
        dom.faces().iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let target: std::collections::HashSet<usize> = to.iter().filter_map(|&e| inner_face(e)).collect();
    let mut seen = vec![false; spins.len()];
    let mut stack: Vec<usize> = from
        .iter()
        .filter_map(|&e| inner_face(e))
        .filter(|&f| spins[f] == sign)
        .collect();
    while let Some(f) = stack.pop() {
        if std::mem::replace(&mut seen[f], true) {
            continue;
        }
        if target.contains(&f) {
            return true;
        }
        let (x, y) = dom.faces()[f];
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&g) = index.get(&(x + dx, y + dy)) {
                    if !seen[g] && spins[g] == sign {
                        stack.push(g);
                    }
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ArcSpec, Label};
    use rand::SeedableRng;
    use approx::assert_abs_diff_eq;

    fn x() -> f64 {
        X_CRIT
    }

    fn square() -> Domain {
        Domain::rectangle(1, 1, 1.0).unwrap()
    }

    /// All subsets of lattice edges with the given odd set, by brute force.
    fn brute_force(dom: &Domain, odd: &[usize]) -> Vec<u128> {
        let ne = dom.edges().len();
        (0u128..1 << ne)
            .filter(|&m| {
                let mut deg = vec![0; dom.vertices().len()];
                for e in 0..ne {
                    if m >> e & 1 == 1 {
                        deg[dom.edges()[e].from] += 1;
                        deg[dom.edges()[e].to] += 1;
                    }
                }
                (0..deg.len()).all(|v| (deg[v] % 2 == 1) == odd.contains(&v))
            })
            .collect()
    }

    fn sorted(mut v: Vec<u128>) -> Vec<u128> {
        v.sort();
        v
    }

    #[test]
    fn one_face_no_sources() {
        let d = square();
        let en = Enumerator::new(&d, &[false; 4], DEFAULT_EDGE_CAP).unwrap();
        let cfgs = en.configs(&[]).unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!(sorted(cfgs.iter().map(|c| c.lattice).collect()), vec![0, 0b1111]);
    }

    #[test]
    fn one_face_adjacent_sources() {
        let d = square();
        let en = Enumerator::new(&d, &[false; 4], DEFAULT_EDGE_CAP).unwrap();
        let cfgs = en
            .configs(&[Source::Vertex(0), Source::Vertex(1)])
            .unwrap();
        let got = sorted(cfgs.iter().map(|c| c.lattice).collect());
        assert_eq!(got.len(), 2);
        assert_eq!(got, sorted(brute_force(&d, &[0, 1])));
    }

    #[test]
    fn two_faces_match_brute_force() {
        let d = Domain::rectangle(2, 1, 1.0).unwrap();
        let en = Enumerator::new(&d, &vec![false; d.edges().len()], DEFAULT_EDGE_CAP).unwrap();
        let got = sorted(en.configs(&[]).unwrap().iter().map(|c| c.lattice).collect());
        assert_eq!(got.len(), 4);
        assert_eq!(got, sorted(brute_force(&d, &[])));
        let got = sorted(
            en.configs(&[Source::Vertex(0), Source::Vertex(4)])
                .unwrap()
                .iter()
                .map(|c| c.lattice)
                .collect(),
        );
        assert_eq!(got, sorted(brute_force(&d, &[0, 4])));
    }

    #[test]
    fn partition_one_face() {
        let d = square();
        let en = Enumerator::new(&d, &[false; 4], DEFAULT_EDGE_CAP).unwrap();
        let z = en.partition_function(&[]).unwrap();
        assert_abs_diff_eq!(z, 1.0 + x().powi(4), epsilon = 1e-14);
        assert_abs_diff_eq!(z, 18.0 - 12.0 * 2f64.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(z, 1.029_437_251_522_859, epsilon = 1e-12);
        let mut free = [false; 4];
        free[0] = true;
        let en = Enumerator::new(&d, &free, DEFAULT_EDGE_CAP).unwrap();
        assert_abs_diff_eq!(
            en.partition_function(&[]).unwrap(),
            1.0 + x().powi(3),
            epsilon = 1e-14
        );
    }

    #[test]
    fn rejects_repeated_and_odd_sources() {
        let d = square();
        let en = Enumerator::new(&d, &[false; 4], DEFAULT_EDGE_CAP).unwrap();
        assert!(en.partition_function(&[Source::Vertex(1), Source::Vertex(1)]).is_err());
        assert!(en.partition_function(&[Source::Vertex(1)]).is_err());
        assert!(en.partition_function(&[Source::Vertex(9), Source::Vertex(1)]).is_err());
    }

    #[test]
    fn refuses_large_domains() {
        let d = Domain::rectangle(5, 4, 1.0).unwrap();
        let free = vec![false; d.edges().len()];
        assert!(matches!(
            Enumerator::new(&d, &free, DEFAULT_EDGE_CAP),
            Err(IflError::TooLarge { .. })
        ));
    }

    #[test]
    fn midedge_source_covers_both_halves() {
        // one face, sources at a corner and at the midpoint of the opposite edge
        let d = square();
        let en = Enumerator::new(&d, &[false; 4], DEFAULT_EDGE_CAP).unwrap();
        let v0 = d.vertex_id((0, 0)).unwrap();
        let top = d.edge_from(d.vertex_id((0, 1)).unwrap(), 0).unwrap();
        let corner = Source::Site(Site::Corner { vertex: v0, dir: 1 });
        let cfgs = en.configs(&[corner, Source::Site(Site::Mid(top))]).unwrap();
        assert_eq!(cfgs.len(), 2);
        for c in &cfgs {
            assert!(!c.contains(top));
            assert_eq!(c.stubs.len(), 2);
        }
        let z = en
            .partition_function(&[corner, Source::Site(Site::Mid(top))])
            .unwrap();
        let hw = half_edge_weight();
        let cw = corner_weight();
        // up the left side (one edge) or round the right (two edges), then the half-edge
        assert_abs_diff_eq!(z, cw * hw * (x() + x().powi(2)), epsilon = 1e-14);
    }

    #[test]
    fn bijection_round_trip_and_weights() {
        let d = Domain::rectangle(2, 2, 1.0).unwrap();
        let arcs = vec![
            ArcSpec { label: Label::Minus, from: (1, 0), to: (2, 1), spin: None },
            ArcSpec { label: Label::Free, from: (2, 1), to: (0, 2), spin: Some(-1) },
            ArcSpec { label: Label::Plus, from: (0, 2), to: (1, 0), spin: None },
        ];
        let bc = BoundaryConditions::from_arcs(&d, &arcs, None).unwrap();
        let sb = SpinBoundary::from_bc(&d, &bc);
        let en = Enumerator::with_bc(&d, &bc).unwrap();
        let free = bc.free_mask(&d);
        let mut images = std::collections::HashSet::new();
        let mut zs = KahanSum::default();
        for_each_spin_config(&d, &sb, |spins, w| {
            let edges = spins_to_edges(&d, &sb, spins).unwrap();
            assert_eq!(edges_to_spins(&d, &sb, &edges).unwrap(), spins);
            let nonfree = (0..edges.len()).filter(|&e| edges[e] && !free[e]).count();
            assert_abs_diff_eq!(w, x().powi(nonfree as i32), epsilon = 1e-15);
            // the Boltzmann form with x = exp(-2 beta)
            let beta = -x().ln() / 2.0;
            let mut energy = 0.0;
            for e in 0..d.edges().len() {
                let pair = match d.edge_faces(e) {
                    [Some(l), Some(r)] => Some((spins[l], spins[r])),
                    [Some(f), None] | [None, Some(f)] => sb.coupling(e).map(|o| (spins[f], o)),
                    _ => None,
                };
                if let Some((s, t)) = pair {
                    energy += f64::from(s * t) - 1.0;
                }
            }
            assert_abs_diff_eq!(w, (beta * energy).exp(), epsilon = 1e-14);
            let mask = (0..edges.len()).fold(0u128, |m, e| if edges[e] { m | 1 << e } else { m });
            images.insert(mask);
            zs.add(w);
        });
        assert_eq!(images.len(), 16);
        // the odd set of every image is the pair of spin-change marks
        let a = d.vertex_id((1, 0)).unwrap();
        let c = d.vertex_id((0, 2)).unwrap();
        let expected: std::collections::HashSet<u128> =
            brute_force(&d, &[a, c]).into_iter().collect();
        assert_eq!(images, expected);
        let z = en
            .partition_function(&[Source::Vertex(a), Source::Vertex(c)])
            .unwrap();
        assert_abs_diff_eq!(z, zs.value(), epsilon = 1e-14);
    }

    #[test]
    fn bijection_examples() {
        let d = Domain::rectangle(2, 2, 1.0).unwrap();
        let sb = SpinBoundary::uniform(&d, 1);
        let e = spins_to_edges(&d, &sb, &[1, 1, 1, 1]).unwrap();
        assert!(e.iter().all(|&b| !b));
        let e = spins_to_edges(&d, &sb, &[1, 1, -1, 1]).unwrap();
        let f = d.face_edges(2);
        for (i, &b) in e.iter().enumerate() {
            assert_eq!(b, f.contains(&i));
        }
        assert!(edges_to_spins(&d, &sb, &[true; 12]).is_err());
    }

    #[test]
    fn transfer_matrix_matches_enumeration() {
        for (w, h) in [(1, 1), (2, 1), (3, 2), (2, 3), (4, 3)] {
            let d = Domain::rectangle(w, h, 1.0).unwrap();
            for sb in [SpinBoundary::uniform(&d, 1), SpinBoundary::all_free(&d), mixed(&d)] {
                let a = transfer_matrix(&d, &sb);
                let b = spin_partition_enum(&d, &sb).unwrap();
                assert_abs_diff_eq!(a, b, epsilon = 1e-12 * b);
            }
        }
    }

    fn mixed(d: &Domain) -> SpinBoundary {
        let mut sb = SpinBoundary::uniform(d, 1);
        for (i, bv) in d.boundary().iter().enumerate() {
            match i % 3 {
                0 => sb.free[bv.out_edge] = true,
                1 => sb.outer[bv.out_edge] = Some(-1),
                _ => {}
            }
        }
        sb
    }

    #[test]
    fn empty_configurations_count() {
        for shape in crate::lattice::fixed_polyominoes(4) {
            let d = Domain::from_faces(&shape, 1.0).unwrap();
            let en = Enumerator::new(&d, &vec![false; d.edges().len()], DEFAULT_EDGE_CAP).unwrap();
            assert_eq!(en.configs(&[]).unwrap().len(), 1 << d.faces().len());
        }
    }

    #[test]
    fn exact_sampling_one_face() {
        let d = square();
        let sb = SpinBoundary::uniform(&d, 1);
        let n = 100_000;
        let s = sample_spins(&d, &sb, n, 7).unwrap();
        assert_eq!(s.method, SamplingMethod::Exact);
        let minus = s.samples.iter().filter(|c| c[0] == -1).count() as f64 / n as f64;
        let p = x().powi(4) / (1.0 + x().powi(4));
        assert_abs_diff_eq!(p, 0.028_595, epsilon = 1e-6);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((minus - p).abs() < 3.0 * sd, "{minus} vs {p}");

        let sb = SpinBoundary::all_free(&d);
        let mut free_edge = SpinBoundary::uniform(&d, 1);
        free_edge.free[d.boundary()[0].out_edge] = true;
        let s = sample_spins(&d, &free_edge, n, 8).unwrap();
        let minus = s.samples.iter().filter(|c| c[0] == -1).count() as f64 / n as f64;
        let p = x().powi(3) / (1.0 + x().powi(3));
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((minus - p).abs() < 3.0 * sd, "{minus} vs {p}");
        let s = sample_spins(&d, &sb, 1000, 9).unwrap();
        let minus = s.samples.iter().filter(|c| c[0] == -1).count();
        assert!(minus > 400 && minus < 600);
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = Domain::rectangle(5, 5, 1.0).unwrap();
        let sb = SpinBoundary::uniform(&d, 1);
        let a = sample_spins(&d, &sb, 5, 11).unwrap();
        let b = sample_spins(&d, &sb, 5, 11).unwrap();
        assert!(matches!(a.method, SamplingMethod::Metropolis { .. }));
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn metropolis_matches_exact_magnetization() {
        let d = Domain::rectangle(3, 3, 1.0).unwrap();
        let mut sb = SpinBoundary::uniform(&d, 1);
        for bv in d.boundary().iter().take(6) {
            sb.outer[bv.out_edge] = Some(-1);
        }
        let mut exact = KahanSum::default();
        let mut z = KahanSum::default();
        for_each_spin_config(&d, &sb, |s, w| {
            exact.add(w * f64::from(s[4]));
            z.add(w);
        });
        let m_exact = exact.value() / z.value();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let run = metropolis(&d, &sb, 20_000, 200, 2, &mut rng).unwrap();
        let m = run.samples.iter().map(|s| f64::from(s[4])).sum::<f64>() / 20_000.0;
        assert!((m - m_exact).abs() < 0.05, "{m} vs {m_exact}");
    }

    /// Random-cluster brute force: bonds on interior edges and on wired
    /// boundary edges (to one ghost vertex per arc), weight
    /// p^open (1-p)^closed 2^clusters with p = 1 - x.
    fn random_cluster_connection(dom: &Domain, points: &[Point], i: usize, j: usize) -> f64 {
        let arcs = wired_arc_edges(dom, points).unwrap();
        let nf = dom.faces().len();
        let mut bonds = Vec::new();
        for e in 0..dom.edges().len() {
            match dom.edge_faces(e) {
                [Some(l), Some(r)] => bonds.push((l, r)),
                [Some(f), None] | [None, Some(f)] => {
                    if let Some(a) = arcs.iter().position(|arc| arc.contains(&e)) {
                        bonds.push((f, nf + a));
                    }
                }
                _ => {}
            }
        }
        let n = nf + arcs.len();
        let p = 1.0 - x();
        let (mut hit, mut total) = (0.0, 0.0);
        for mask in 0u64..1 << bonds.len() {
            let mut parent: Vec<usize> = (0..n).collect();
            fn root(parent: &mut [usize], mut v: usize) -> usize {
                while parent[v] != v {
                    parent[v] = parent[parent[v]];
                    v = parent[v];
                }
                v
            }
            let mut open = 0;
            for (b, &(u, v)) in bonds.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    open += 1;
                    let (ru, rv) = (root(&mut parent, u), root(&mut parent, v));
                    parent[ru] = rv;
                }
            }
            let clusters = (0..n).filter(|&v| root(&mut parent, v) == v).count();
            let w = p.powi(open) * (1.0 - p).powi(bonds.len() as i32 - open) * 2f64.powi(clusters as i32);
            total += w;
            if root(&mut parent, nf + i) == root(&mut parent, nf + j) {
                hit += w;
            }
        }
        hit / total
    }

    #[test]
    fn fk_crossing_matches_random_cluster_counting() {
        let d = Domain::rectangle(2, 2, 1.0).unwrap();
        for points in [
            vec![(0, 2), (0, 0), (2, 0), (2, 2)],
            vec![(0, 1), (1, 0), (2, 1), (1, 2)],
            vec![(0, 2), (1, 0), (2, 0), (2, 1)],
        ] {
            let es = fk_crossing_exact(&d, &points, &[0, 1]).unwrap();
            let rc = random_cluster_connection(&d, &points, 0, 1);
            assert!(es > 0.0 && es < 1.0);
            assert_abs_diff_eq!(es, rc, epsilon = 1e-13);
            assert_abs_diff_eq!(same_cluster_probability(&d, &points, &[1, 0]).unwrap(), rc, epsilon = 1e-13);
        }
    }

    #[test]
    fn fk_crossing_single_arc_and_symmetry() {
        let d = Domain::rectangle(3, 3, 1.0).unwrap();
        assert_abs_diff_eq!(fk_crossing_exact(&d, &[(0, 3), (0, 0)], &[0]).unwrap(), 1.0, epsilon = 1e-15);
        let pts = [(0, 3), (0, 0), (3, 0), (3, 3)];
        let a = fk_crossing_exact(&d, &pts, &[0, 1]).unwrap();
        let b = fk_crossing_exact(&d, &pts, &[1, 0]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        // reflected marking on the same square
        let c = fk_crossing_exact(&d, &[(3, 0), (3, 3), (0, 3), (0, 0)], &[0, 1]).unwrap();
        assert_abs_diff_eq!(a, c, epsilon = 1e-14);
        // restricted sums add up to the total with every arc free-floating
        let z = restricted_partitions(&d, &pts).unwrap();
        assert_abs_diff_eq!(z[1], z[2], epsilon = 1e-12 * z[1]);
        assert_abs_diff_eq!(z[0], z[3], epsilon = 1e-12 * z[0]);
    }

    #[test]
    fn fk_marking_is_validated() {
        let d = Domain::rectangle(2, 2, 1.0).unwrap();
        assert!(wired_arc_edges(&d, &[(0, 2), (0, 0), (2, 0)]).is_err());
        assert!(wired_arc_edges(&d, &[(0, 0), (0, 2), (2, 0), (2, 2)]).is_err());
        assert!(wired_arc_edges(&d, &[(1, 1), (0, 0)]).is_err());
        assert!(fk_crossing_exact(&d, &[(0, 2), (0, 0), (2, 0), (2, 2)], &[0, 0]).is_err());
        assert!(same_cluster_probability(&d, &[(0, 2), (0, 0), (2, 0), (2, 1), (2, 2), (1, 2)], &[0, 1, 2]).is_err());
    }

    #[test]
    fn spin_crossing_detects_diagonal_chains() {
        let d = Domain::rectangle(2, 2, 1.0).unwrap();
        let arcs = wired_arc_edges(&d, &[(0, 2), (0, 0), (2, 0), (2, 2)]).unwrap();
        let idx = |p: Point| d.faces().iter().position(|&q| q == p).unwrap();
        let mut spins = vec![-1i8; 4];
        spins[idx((0, 0))] = 1;
        spins[idx((1, 1))] = 1;
        assert!(spin_crossing(&d, &spins, &arcs[0], &arcs[1], 1));
        assert!(spin_crossing(&d, &spins, &arcs[0], &arcs[1], -1));
        spins[idx((1, 1))] = -1;
        assert!(!spin_crossing(&d, &spins, &arcs[0], &arcs[1], 1));
    }
}
