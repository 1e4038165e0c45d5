//! Points on S², node sets, and geodesic statistics.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Two nodes closer than this (radians) are considered duplicates.
pub const DISTINCT_TOL: f64 = 1e-10;

/// A point on the unit sphere. Every constructor normalizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinates ({x}, {y}, {z})")));
        }
        let r = (x * x + y * y + z * z).sqrt();
        if r == 0.0 || !r.is_finite() {
            return Err(Error::Domain("cannot normalize the zero vector".into()));
        }
        Ok(Self { x: x / r, y: y / r, z: z / r })
    }

    /// Like `new`, but keeps a vector whose norm is 1 to rounding unchanged,
    /// so values written and read back compare equal.
    pub fn new_preserving(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self::new(x, y, z)?;
        if ((x * x + y * y + z * z).sqrt() - 1.0).abs() <= 2.0 * f64::EPSILON {
            return Ok(Self { x, y, z });
        }
        Ok(v)
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    /// Longitude/latitude in radians.
    pub fn from_lon_lat(lon: f64, lat: f64) -> Self {
        let (sl, cl) = lon.sin_cos();
        let (sp, cp) = lat.sin_cos();
        Self::new(cp * cl, cp * sl, sp).expect("angles produce a unit vector")
    }

    pub fn e_x() -> Self {
        Self { x: 1.0, y: 0.0, z: 0.0 }
    }

    pub fn e_y() -> Self {
        Self { x: 0.0, y: 1.0, z: 0.0 }
    }

    pub fn e_z() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> [f64; 3] {
        [
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        ]
    }

    pub fn neg(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn lon(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn lat(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).asin()
    }
}

/// Great-circle distance, `atan2(‖p×q‖, p·q)`.
pub fn geodesic_distance(p: &UnitVector3, q: &UnitVector3) -> f64 {
    let c = p.cross(q);
    let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    s.atan2(p.dot(q))
}

/// A proper rotation of R³, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation([[f64; 3]; 3]);

impl Rotation {
    /// Rodrigues rotation about `axis` (need not be normalized) by `angle`.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self> {
        let u = UnitVector3::from_array(axis)?;
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        let (x, y, z) = (u.x, u.y, u.z);
        Ok(Self([
            [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
            [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
            [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
        ]))
    }

    pub fn apply_array(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn apply(&self, v: &UnitVector3) -> UnitVector3 {
        UnitVector3::from_array(self.apply_array(v.to_array())).expect("rotation preserves norm")
    }

    pub fn inverse(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeFamily {
    Icosahedral,
    Fibonacci,
    MinEnergy,
    Custom,
}

impl fmt::Display for NodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeFamily::Icosahedral => "icosahedral",
            NodeFamily::Fibonacci => "fibonacci",
            NodeFamily::MinEnergy => "min-energy",
            NodeFamily::Custom => "custom",
        })
    }
}

impl FromStr for NodeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "icosahedral" => Ok(NodeFamily::Icosahedral),
            "fibonacci" => Ok(NodeFamily::Fibonacci),
            "min-energy" | "min_energy" => Ok(NodeFamily::MinEnergy),
            "custom" => Ok(NodeFamily::Custom),
            other => Err(Error::InvalidArgument(format!("unknown node family `{other}`"))),
        }
    }
}

/// An ordered set of pairwise distinct nodes on S².
#[derive(Debug, Clone)]
pub struct NodeSet {
    nodes: Vec<UnitVector3>,
    family: NodeFamily,
}

impl NodeSet {
    /// Validates pairwise distinctness (geodesic distance > 1e-10).
    pub fn new(nodes: Vec<UnitVector3>, family: NodeFamily) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::DegenerateNodes("empty node set".into()));
        }
        let set = Self { nodes, family };
        if set.len() >= 2 {
            let index = NeighborIndex::new(&set.nodes);
            let (i, j, d) = index.closest_pair(Execution::default());
            if d <= DISTINCT_TOL {
                return Err(Error::DegenerateNodes(format!(
                    "nodes {i} and {j} coincide (distance {d:e})"
                )));
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[UnitVector3] {
        &self.nodes
    }

    pub fn family(&self) -> NodeFamily {
        self.family
    }

    pub fn get(&self, i: usize) -> UnitVector3 {
        self.nodes[i]
    }

    pub fn rotated(&self, r: &Rotation) -> Self {
        Self {
            nodes: self.nodes.iter().map(|p| r.apply(p)).collect(),
            family: self.family,
        }
    }

    pub fn arrays(&self) -> Vec<[f64; 3]> {
        self.nodes.iter().map(|p| p.to_array()).collect()
    }
}

/// Density statistics of a node set, all in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicStats {
    /// Mesh norm estimate (a lower bound on the true fill distance).
    pub h: f64,
    /// Separation radius.
    pub q: f64,
    /// `h / q`.
    pub rho: f64,
    /// Probe count used for `h`.
    pub resolution: usize,
}

impl GeodesicStats {
    pub fn compute(x: &NodeSet, resolution: usize, exec: Execution) -> Result<Self> {
        let q = separation_radius(x)?;
        let h = mesh_norm_estimate_with(x, resolution, exec)?;
        Ok(Self { h, q, rho: h / q, resolution })
    }

    /// `rho < 1` means the probe set was too coarse for the mesh norm.
    pub fn underestimated(&self) -> bool {
        self.rho < 1.0
    }
}

/// Default probe count for the mesh norm: 100·N.
pub fn default_resolution(n: usize) -> usize {
    100 * n
}

/// Half the minimum pairwise geodesic distance.
pub fn separation_radius(x: &NodeSet) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument("separation radius needs N ≥ 2".into()));
    }
    let index = NeighborIndex::new(x.nodes());
    let (i, j, d) = index.closest_pair(Execution::default());
    if d <= DISTINCT_TOL {
        return Err(Error::DegenerateNodes(format!("nodes {i} and {j} coincide")));
    }
    Ok(0.5 * d)
}

/// Sup over a Fibonacci probe lattice of `resolution` points of the distance
/// to the nearest node. This is a lower bound on the mesh norm that converges
/// from below as `resolution` grows. `resolution` must be at least 10·N and is
/// rounded up to an odd count.
pub fn mesh_norm_estimate(x: &NodeSet, resolution: usize) -> Result<f64> {
    mesh_norm_estimate_with(x, resolution, Execution::default())
}

pub fn mesh_norm_estimate_with(x: &NodeSet, resolution: usize, exec: Execution) -> Result<f64> {
    if resolution < 10 * x.len() {
        return Err(Error::InvalidArgument(format!(
            "mesh-norm resolution {resolution} below 10·N = {}",
            10 * x.len()
        )));
    }
    let probes = crate::nodes::fibonacci_points(resolution | 1);
    Ok(mesh_norm_over_probes(x, &probes, exec))
}

/// Max over `probes` of the distance to the nearest node of `x`.
pub fn mesh_norm_over_probes(x: &NodeSet, probes: &[UnitVector3], exec: Execution) -> f64 {
    let index = NeighborIndex::new(x.nodes());
    exec.map(probes.len(), |k| index.nearest_distance(&probes[k]))
        .into_iter()
        .fold(0.0, f64::max)
}

/// The `p` nearest nodes to node `i` (including `i`), ties broken by index.
pub fn nearest_neighbors(x: &NodeSet, i: usize, p: usize) -> Result<Vec<usize>> {
    if i >= x.len() {
        return Err(Error::InvalidArgument(format!("node index {i} out of range")));
    }
    NeighborIndex::new(x.nodes()).k_nearest(&x.get(i), p)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    index: usize,
}

fn by_distance_then_index(a: &Candidate, b: &Candidate) -> Ordering {
    a.dist
        .partial_cmp(&b.dist)
        .unwrap_or(Ordering::Equal)
        .then(a.index.cmp(&b.index))
}

/// Longitude–latitude cell grid over a point set, answering exact k-nearest
/// and radius queries in geodesic distance.
#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    points: &'a [UnitVector3],
    n_lat: usize,
    n_lon: usize,
    d_lat: f64,
    d_lon: f64,
    /// CSR layout: cell `c` owns `items[starts[c]..starts[c + 1]]`.
    starts: Vec<usize>,
    items: Vec<usize>,
}

// Extra angular margin when selecting cells; candidates are always filtered
// by exact distance afterwards.
const CELL_PAD: f64 = 1e-7;

impl<'a> NeighborIndex<'a> {
    pub fn new(points: &'a [UnitVector3]) -> Self {
        let n = points.len().max(1);
        let n_lat = ((n as f64 / 4.0).sqrt().ceil() as usize).clamp(1, 1024);
        let n_lon = 2 * n_lat;
        let d_lat = PI / n_lat as f64;
        let d_lon = 2.0 * PI / n_lon as f64;
        let mut grid = Self {
            points,
            n_lat,
            n_lon,
            d_lat,
            d_lon,
            starts: Vec::new(),
            items: Vec::new(),
        };
        let cells: Vec<usize> = points.iter().map(|p| grid.cell_of(p)).collect();
        let mut counts = vec![0usize; n_lat * n_lon + 1];
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for c in 0..n_lat * n_lon {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            items[fill[c]] = i;
            fill[c] += 1;
        }
        grid.starts = counts;
        grid.items = items;
        grid
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn band_of(&self, lat: f64) -> usize {
        (((lat + FRAC_PI_2) / self.d_lat).floor().max(0.0) as usize).min(self.n_lat - 1)
    }

    fn col_of(&self, lon: f64) -> usize {
        (((lon + PI) / self.d_lon).floor().max(0.0) as usize).min(self.n_lon - 1)
    }

    fn cell_of(&self, p: &UnitVector3) -> usize {
        self.band_of(p.lat()) * self.n_lon + self.col_of(p.lon())
    }

    /// Every point within geodesic distance `r` of `q`, unsorted.
    fn within(&self, q: &UnitVector3, r: f64, out: &mut Vec<Candidate>) {
        out.clear();
        let lat = q.lat();
        let lon = q.lon();
        let rp = r + CELL_PAD;
        let lo = lat - rp;
        let hi = lat + rp;
        let b0 = self.band_of(lo.max(-FRAC_PI_2));
        let b1 = self.band_of(hi.min(FRAC_PI_2));
        let all_lon = lo <= -FRAC_PI_2 || hi >= FRAC_PI_2 || {
            let s = rp.sin() / lat.cos();
            s >= 1.0 || 2.0 * (s.asin() + CELL_PAD) >= 2.0 * PI - self.d_lon
        };
        let visit = |col: usize, band: usize, out: &mut Vec<Candidate>| {
            let c = band * self.n_lon + col;
            for &i in &self.items[self.starts[c]..self.starts[c + 1]] {
                let d = geodesic_distance(q, &self.points[i]);
                if d <= r {
                    out.push(Candidate { dist: d, index: i });
                }
            }
        };
        if all_lon {
            for band in b0..=b1 {
                for col in 0..self.n_lon {
                    visit(col, band, out);
                }
            }
            return;
        }
        let half = (rp.sin() / lat.cos()).asin() + CELL_PAD;
        let start = ((lon - half + PI) / self.d_lon).floor() as i64;
        let end = ((lon + half + PI) / self.d_lon).floor() as i64;
        let n_lon = self.n_lon as i64;
        let end = end.min(start + n_lon - 1);
        for band in b0..=b1 {
            for c in start..=end {
                visit(c.rem_euclid(n_lon) as usize, band, out);
            }
        }
    }

    /// The `k` nearest points to `q`, sorted by (distance, index).
    pub fn k_nearest(&self, q: &UnitVector3, k: usize) -> Result<Vec<usize>> {
        Ok(self.k_nearest_with_distance(q, k)?.into_iter().map(|(i, _)| i).collect())
    }

    pub fn k_nearest_with_distance(&self, q: &UnitVector3, k: usize) -> Result<Vec<(usize, f64)>> {
        let n = self.points.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "neighbor count {k} outside 1..={n}"
            )));
        }
        let mut r = 2.2 * (k as f64 / n as f64).sqrt() + 1e-9;
        let mut buf = Vec::with_capacity(2 * k);
        loop {
            if r >= PI {
                buf = (0..n)
                    .map(|i| Candidate { dist: geodesic_distance(q, &self.points[i]), index: i })
                    .collect();
            } else {
                self.within(q, r, &mut buf);
            }
            if buf.len() >= k {
                buf.sort_unstable_by(by_distance_then_index);
                buf.truncate(k);
                return Ok(buf.into_iter().map(|c| (c.index, c.dist)).collect());
            }
            r *= 2.0;
        }
    }

    pub fn nearest_distance(&self, q: &UnitVector3) -> f64 {
        self.k_nearest_with_distance(q, 1).map(|v| v[0].1).unwrap_or(f64::INFINITY)
    }

    /// The closest pair `(i, j, distance)` with `i < j`; ties by index.
    pub fn closest_pair(&self, exec: Execution) -> (usize, usize, f64) {
        let n = self.points.len();
        if n < 2 {
            return (0, 0, f64::INFINITY);
        }
        let best = exec.map(n, |i| {
            let nn = self
                .k_nearest_with_distance(&self.points[i], 2)
                .expect("n ≥ 2");
            // a duplicate of i with smaller index sorts first
            let (j, d) = if nn[0].0 == i { nn[1] } else { nn[0] };
            (i.min(j), i.max(j), d)
        });
        best.into_iter()
            .min_by(|a, b| {
                a.2.partial_cmp(&b.2)
                    .unwrap_or(Ordering::Equal)
                    .then((a.0, a.1).cmp(&(b.0, b.1)))
            })
            .expect("non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn octahedron() -> NodeSet {
        let v = [
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
        ];
        NodeSet::new(
            v.iter().map(|a| UnitVector3::from_array(*a).unwrap()).collect(),
            NodeFamily::Custom,
        )
        .unwrap()
    }

    pub(crate) fn random_points(n: usize, seed: u64) -> Vec<UnitVector3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| loop {
                let v = [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ];
                let r2: f64 = v.iter().map(|a| a * a).sum();
                if r2 > 1e-3 && r2 <= 1.0 {
                    break UnitVector3::from_array(v).unwrap();
                }
            })
            .collect()
    }

    #[test]
    fn distance_special_cases() {
        let ez = UnitVector3::e_z();
        assert_eq!(geodesic_distance(&ez, &ez), 0.0);
        assert_eq!(geodesic_distance(&ez, &ez.neg()), PI);
        assert_abs_diff_eq!(geodesic_distance(&ez, &UnitVector3::e_x()), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn constructor_normalizes_and_rejects() {
        let p = UnitVector3::new(3.0, 0.0, 4.0).unwrap();
        assert_abs_diff_eq!(p.dot(&p), 1.0, epsilon = 1e-15);
        assert!(UnitVector3::new(0.0, 0.0, 0.0).is_err());
        assert!(UnitVector3::new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let p = random_points(300, 7);
        for t in p.chunks(3) {
            let (a, b, c) = (&t[0], &t[1], &t[2]);
            let ab = geodesic_distance(a, b);
            let bc = geodesic_distance(b, c);
            let ac = geodesic_distance(a, c);
            assert!(ac <= ab + bc + 1e-12);
            assert_eq!(ab, geodesic_distance(b, a));
        }
    }

    #[test]
    fn separation_radius_small_sets() {
        let ez = UnitVector3::e_z();
        let pair = NodeSet::new(vec![ez, ez.neg()], NodeFamily::Custom).unwrap();
        assert_abs_diff_eq!(separation_radius(&pair).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(
            separation_radius(&octahedron()).unwrap(),
            PI / 4.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let ez = UnitVector3::e_z();
        let err = NodeSet::new(vec![ez, UnitVector3::e_x(), ez], NodeFamily::Custom).unwrap_err();
        assert!(matches!(err, Error::DegenerateNodes(_)));
    }

    #[test]
    fn separation_radius_matches_all_pairs() {
        let x = NodeSet::new(crate::nodes::fibonacci_points(2501), NodeFamily::Fibonacci).unwrap();
        let p = x.nodes();
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                best = best.min(geodesic_distance(&p[i], &p[j]));
            }
        }
        assert_eq!(separation_radius(&x).unwrap(), 0.5 * best);
    }

    #[test]
    fn mesh_norm_single_node_and_octahedron() {
        let single = NodeSet::new(vec![UnitVector3::e_z()], NodeFamily::Custom).unwrap();
        let h = mesh_norm_estimate(&single, 20_001).unwrap();
        assert!(h > PI - 0.05 && h <= PI);

        // face centers of the octahedron sit at arccos(1/√3)
        let h = mesh_norm_estimate(&octahedron(), 200_001).unwrap();
        let exact = (1.0 / 3f64.sqrt()).acos();
        assert!(h <= exact + 1e-12);
        assert!(exact - h < 5e-3, "h = {h}");
    }

    #[test]
    fn mesh_norm_monotone_on_nested_probes() {
        let x = octahedron();
        let probes = random_points(4000, 3);
        let mut last = 0.0;
        for m in [10, 100, 1000, 4000] {
            let h = mesh_norm_over_probes(&x, &probes[..m], Execution::Sequential);
            assert!(h >= last);
            last = h;
        }
        assert!(mesh_norm_estimate(&x, 59).is_err());
    }

    #[test]
    fn neighbors_trivial_cases() {
        let x = octahedron();
        assert_eq!(nearest_neighbors(&x, 3, 1).unwrap(), vec![3]);
        let nn = nearest_neighbors(&x, 0, 5).unwrap();
        assert_eq!(nn, vec![0, 1, 2, 3, 4]);
        assert!(nearest_neighbors(&x, 0, 7).is_err());
    }

    fn brute_knn(p: &[UnitVector3], q: &UnitVector3, k: usize) -> Vec<usize> {
        let mut all: Vec<Candidate> = p
            .iter()
            .enumerate()
            .map(|(i, x)| Candidate { dist: geodesic_distance(q, x), index: i })
            .collect();
        all.sort_by(by_distance_then_index);
        all.into_iter().take(k).map(|c| c.index).collect()
    }

    #[test]
    fn grid_search_equals_brute_force() {
        let p = random_points(500, 11);
        let index = NeighborIndex::new(&p);
        for i in 0..p.len() {
            for k in [1, 7, 40] {
                assert_eq!(index.k_nearest(&p[i], k).unwrap(), brute_knn(&p, &p[i], k));
            }
        }
        // queries near the poles and the date line
        let extra = [
            UnitVector3::new(1e-9, 0.0, 1.0).unwrap(),
            UnitVector3::new(0.0, 1e-9, -1.0).unwrap(),
            UnitVector3::new(-1.0, 1e-12, 0.3).unwrap(),
            UnitVector3::new(-1.0, -1e-12, -0.3).unwrap(),
        ];
        for q in &extra {
            assert_eq!(index.k_nearest(q, 25).unwrap(), brute_knn(&p, q, 25));
        }
    }

    #[test]
    fn rotation_preserves_distances() {
        let r = Rotation::from_axis_angle([0.3, -1.0, 0.5], 1.1).unwrap();
        let p = random_points(20, 5);
        for w in p.windows(2) {
            let d0 = geodesic_distance(&w[0], &w[1]);
            let d1 = geodesic_distance(&r.apply(&w[0]), &r.apply(&w[1]));
            assert_abs_diff_eq!(d0, d1, epsilon = 1e-14);
            let back = r.inverse().apply(&r.apply(&w[0]));
            assert_abs_diff_eq!(back.dot(&w[0]), 1.0, epsilon = 1e-14);
        }
    }
}
