//! Finite metric spaces, their generators, and the log-remetrization.
//!
//! Every space here is a finite truncation of a (conceptually unbounded)
//! metric space. Distances are exposed through a single `dist` method;
//! explicit matrices are stored as a validated lower-triangular table,
//! while generated spaces (grids, Cayley balls, trees) keep their
//! coordinates or words and evaluate distances in closed form. The
//! remetrization `d -> ln(1 + d)` and its formal inverse `d -> e^d - 1`
//! are tracked as a composition count on top of the base distances, so
//! remetrizing never copies or re-validates the table.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Absolute tolerance for distance-equality comparisons.
pub const DIST_TOL: f64 = 1e-9;

/// Default cap on the number of points a generator may produce.
pub const DEFAULT_POINT_BUDGET: usize = 4096;

/// Index of a point within a space. Indices are dense `0..n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PointId(pub usize);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Norm used by lattice-coordinate backends.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GridNorm {
    L1,
    L2,
    Linf,
}

impl GridNorm {
    pub fn name(self) -> &'static str {
        match self {
            GridNorm::L1 => "l1",
            GridNorm::L2 => "l2",
            GridNorm::Linf => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Some(GridNorm::L1),
            "l2" => Some(GridNorm::L2),
            "linf" | "loo" | "lmax" => Some(GridNorm::Linf),
            _ => None,
        }
    }
}

/// Supported group families for Cayley-ball generation. Both have
/// canonical normal forms, so breadth-first enumeration is exact.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GroupKind {
    FreeAbelian { rank: usize },
    Free { rank: usize },
}

/// Records how a space was produced.
#[derive(Clone, PartialEq, Debug)]
pub enum GeneratorTag {
    ExplicitMatrix,
    Grid {
        dim: usize,
        side: usize,
        norm: GridNorm,
        offset: i64,
    },
    CayleyBall {
        group: GroupKind,
        radius: usize,
    },
    Tree {
        branching: usize,
        depth: usize,
    },
}

impl GeneratorTag {
    fn base_name(&self) -> &'static str {
        match self {
            GeneratorTag::ExplicitMatrix => "explicit-matrix",
            GeneratorTag::Grid { .. } => "grid",
            GeneratorTag::CayleyBall { .. } => "cayley-ball",
            GeneratorTag::Tree { .. } => "tree",
        }
    }
}

/// Violation of one of the four metric axioms, with witnesses.
#[derive(Clone, PartialEq, Debug)]
pub enum AxiomViolation {
    NotFinite { a: usize, b: usize, value: f64 },
    Negative { a: usize, b: usize, value: f64 },
    ZeroOffDiagonal { a: usize, b: usize },
    Asymmetric { a: usize, b: usize, forward: f64, backward: f64 },
    Triangle { a: usize, b: usize, c: usize, direct: f64, via: f64 },
}

impl fmt::Display for AxiomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxiomViolation::NotFinite { a, b, value } => {
                write!(f, "d({a},{b}) = {value} is not finite")
            }
            AxiomViolation::Negative { a, b, value } => {
                write!(f, "d({a},{b}) = {value} is negative")
            }
            AxiomViolation::ZeroOffDiagonal { a, b } => {
                write!(f, "distinct points {a},{b} at distance 0")
            }
            AxiomViolation::Asymmetric { a, b, forward, backward } => {
                write!(f, "d({a},{b}) = {forward} but d({b},{a}) = {backward}")
            }
            AxiomViolation::Triangle { a, b, c, direct, via } => {
                write!(f, "triangle violated: d({a},{c}) = {direct} > d({a},{b}) + d({b},{c}) = {via}")
            }
        }
    }
}

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("point budget exceeded: generator needs {requested} points but budget is {budget}")]
    BudgetExceeded { requested: usize, budget: usize },
    #[error("metric axiom violated: {0}")]
    Axiom(AxiomViolation),
    #[error("distance table malformed: {0}")]
    MalformedTable(String),
    #[error("exponential map overflows between points {a} and {b} (distance {dist})")]
    Overflow { a: usize, b: usize, dist: f64 },
    #[error("unsupported parameter: {0}")]
    BadParameter(String),
    #[error("point index {index} out of range for space of {len} points")]
    PointOutOfRange { index: usize, len: usize },
}

enum Backend {
    /// Lower-triangular table without diagonal; entry (i, j), j < i, at
    /// `i*(i-1)/2 + j`. Optional display labels.
    Table {
        n: usize,
        lower: Vec<f64>,
        labels: Option<Vec<String>>,
    },
    /// Integer lattice coordinates, `dim` entries per point.
    Lattice {
        dim: usize,
        coords: Vec<i64>,
        norm: GridNorm,
        /// True when `dim == 1` and coordinates strictly increase with the
        /// point index; enables binary-searched interval balls.
        monotone1d: bool,
    },
    /// Rooted-path words: distance |u| + |v| - 2 * common-prefix-length.
    /// Trees use positive child indices; free groups use signed letters.
    Paths { words: Vec<Vec<i16>>, free_group: bool },
}

impl Backend {
    fn len(&self) -> usize {
        match self {
            Backend::Table { n, .. } => *n,
            Backend::Lattice { dim, coords, .. } => coords.len() / dim,
            Backend::Paths { words, .. } => words.len(),
        }
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        match self {
            Backend::Table { lower, .. } => {
                let (i, j) = if a > b { (a, b) } else { (b, a) };
                lower[i * (i - 1) / 2 + j]
            }
            Backend::Lattice { dim, coords, norm, .. } => {
                let pa = &coords[a * dim..(a + 1) * dim];
                let pb = &coords[b * dim..(b + 1) * dim];
                match norm {
                    GridNorm::L1 => pa
                        .iter()
                        .zip(pb)
                        .map(|(x, y)| (x - y).abs())
                        .sum::<i64>() as f64,
                    GridNorm::Linf => pa
                        .iter()
                        .zip(pb)
                        .map(|(x, y)| (x - y).abs())
                        .max()
                        .unwrap_or(0) as f64,
                    GridNorm::L2 => pa
                        .iter()
                        .zip(pb)
                        .map(|(x, y)| {
                            let d = (x - y) as f64;
                            d * d
                        })
                        .sum::<f64>()
                        .sqrt(),
                }
            }
            Backend::Paths { words, .. } => {
                let u = &words[a];
                let v = &words[b];
                let lcp = u.iter().zip(v.iter()).take_while(|(x, y)| x == y).count();
                (u.len() + v.len() - 2 * lcp) as f64
            }
        }
    }

    fn label(&self, i: usize) -> String {
        match self {
            Backend::Table { labels, .. } => match labels {
                Some(ls) => ls[i].clone(),
                None => i.to_string(),
            },
            Backend::Lattice { dim, coords, .. } => {
                let p = &coords[i * dim..(i + 1) * dim];
                if *dim == 1 {
                    p[0].to_string()
                } else {
                    let parts: Vec<String> = p.iter().map(|c| c.to_string()).collect();
                    format!("({})", parts.join(","))
                }
            }
            Backend::Paths { words, free_group } => {
                let w = &words[i];
                if w.is_empty() {
                    return "e".to_string();
                }
                if *free_group {
                    w.iter()
                        .map(|&l| {
                            let g = (l.unsigned_abs() as u8 - 1 + b'a') as char;
                            if l > 0 {
                                g
                            } else {
                                g.to_ascii_uppercase()
                            }
                        })
                        .collect()
                } else {
                    let parts: Vec<String> = w.iter().map(|&c| (c - 1).to_string()).collect();
                    parts.join(".")
                }
            }
        }
    }
}

/// A finite metric space with closed-form or tabulated distances plus a
/// remetrization level (`warp`): positive levels apply `ln(1 + d)` that
/// many times, negative levels apply `e^d - 1`.
#[derive(Clone)]
pub struct MetricSpace {
    backend: Arc<Backend>,
    warp: i32,
    tag: GeneratorTag,
}

fn warp_apply(mut d: f64, warp: i32) -> f64 {
    if warp > 0 {
        for _ in 0..warp {
            d = d.ln_1p();
        }
    } else {
        for _ in 0..-warp {
            d = d.exp_m1();
        }
    }
    d
}

/// Inverse of `warp_apply` in the radius direction: maps a warped radius
/// back to a core radius. Monotone, so ball membership is preserved.
fn warp_unapply(mut r: f64, warp: i32) -> f64 {
    if warp > 0 {
        for _ in 0..warp {
            r = r.exp_m1();
        }
    } else {
        for _ in 0..-warp {
            r = r.ln_1p();
        }
    }
    r
}

impl MetricSpace {
    /// Builds a space from a lower-triangular distance table. `rows[k]`
    /// holds the distances from point `k + 1` to points `0..=k`. All four
    /// metric axioms are checked eagerly.
    pub fn from_matrix(rows: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self, MetricError> {
        let n = rows.len() + 1;
        let mut lower = Vec::with_capacity(n * (n - 1) / 2);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(MetricError::MalformedTable(format!(
                    "row for point {} must have {} entries, found {}",
                    k + 1,
                    k + 1,
                    row.len()
                )));
            }
            lower.extend_from_slice(row);
        }
        if let Some(ls) = &labels {
            if ls.len() != n {
                return Err(MetricError::MalformedTable(format!(
                    "{} labels for {} points",
                    ls.len(),
                    n
                )));
            }
        }
        let backend = Backend::Table { n, lower, labels };
        let space = MetricSpace {
            backend: Arc::new(backend),
            warp: 0,
            tag: GeneratorTag::ExplicitMatrix,
        };
        space.check_metric_axioms(DIST_TOL).map_err(MetricError::Axiom)?;
        Ok(space)
    }

    /// Integer box `{offset .. offset+side-1}^dim` under the chosen norm.
    pub fn grid(dim: usize, side: usize, norm: GridNorm, budget: usize) -> Result<Self, MetricError> {
        Self::grid_with_offset(dim, side, norm, 0, budget)
    }

    pub fn grid_with_offset(
        dim: usize,
        side: usize,
        norm: GridNorm,
        offset: i64,
        budget: usize,
    ) -> Result<Self, MetricError> {
        if !(1..=3).contains(&dim) {
            return Err(MetricError::BadParameter(format!("grid dimension {dim} not in 1..=3")));
        }
        if side == 0 {
            return Err(MetricError::BadParameter("grid side must be positive".into()));
        }
        let count = side
            .checked_pow(dim as u32)
            .ok_or(MetricError::BudgetExceeded { requested: usize::MAX, budget })?;
        if count > budget {
            return Err(MetricError::BudgetExceeded { requested: count, budget });
        }
        let mut coords = Vec::with_capacity(count * dim);
        let mut cursor = vec![0usize; dim];
        loop {
            for &c in &cursor {
                coords.push(c as i64 + offset);
            }
            // lexicographic increment, last axis fastest
            let mut axis = dim;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                cursor[axis] += 1;
                if cursor[axis] < side {
                    break;
                }
                cursor[axis] = 0;
                if axis == 0 {
                    return Ok(MetricSpace {
                        backend: Arc::new(Backend::Lattice {
                            dim,
                            coords,
                            norm,
                            monotone1d: dim == 1,
                        }),
                        warp: 0,
                        tag: GeneratorTag::Grid { dim, side, norm, offset },
                    });
                }
            }
        }
    }

    /// The 1-dimensional lattice `{lo ..= hi}` with the absolute-value metric.
    pub fn interval(lo: i64, hi: i64, budget: usize) -> Result<Self, MetricError> {
        if hi < lo {
            return Err(MetricError::BadParameter(format!("empty interval {lo}..={hi}")));
        }
        let count = (hi - lo + 1) as usize;
        Self::grid_with_offset(1, count, GridNorm::L1, lo, budget)
    }

    /// Ball of the given radius in a finitely generated group under the
    /// word metric for the standard symmetric generating set. Points are
    /// enumerated breadth-first from the identity, so indices are ordered
    /// by word length; the identity is point 0.
    pub fn cayley_ball(group: GroupKind, radius: usize, budget: usize) -> Result<PointedSpace, MetricError> {
        let space = match group {
            GroupKind::FreeAbelian { rank } => {
                if rank == 0 {
                    return Err(MetricError::BadParameter("free-abelian rank must be >= 1".into()));
                }
                let mut coords: Vec<i64> = Vec::new();
                let mut seen = std::collections::HashMap::new();
                let mut queue = std::collections::VecDeque::new();
                let origin = vec![0i64; rank];
                seen.insert(origin.clone(), 0usize);
                coords.extend_from_slice(&origin);
                queue.push_back(origin);
                while let Some(v) = queue.pop_front() {
                    let len: i64 = v.iter().map(|c| c.abs()).sum();
                    if len as usize == radius {
                        continue;
                    }
                    for axis in 0..rank {
                        for step in [1i64, -1] {
                            let mut w = v.clone();
                            w[axis] += step;
                            if w.iter().map(|c| c.abs()).sum::<i64>() as usize > radius {
                                continue;
                            }
                            if !seen.contains_key(&w) {
                                let idx = seen.len();
                                if idx + 1 > budget {
                                    return Err(MetricError::BudgetExceeded {
                                        requested: idx + 1,
                                        budget,
                                    });
                                }
                                seen.insert(w.clone(), idx);
                                coords.extend_from_slice(&w);
                                queue.push_back(w);
                            }
                        }
                    }
                }
                MetricSpace {
                    backend: Arc::new(Backend::Lattice {
                        dim: rank,
                        coords,
                        norm: GridNorm::L1,
                        monotone1d: false,
                    }),
                    warp: 0,
                    tag: GeneratorTag::CayleyBall { group, radius },
                }
            }
            GroupKind::Free { rank } => {
                if rank == 0 || rank > 26 {
                    return Err(MetricError::BadParameter("free rank must be in 1..=26".into()));
                }
                let mut words: Vec<Vec<i16>> = vec![Vec::new()];
                let mut queue = std::collections::VecDeque::new();
                queue.push_back(0usize);
                while let Some(i) = queue.pop_front() {
                    let w = words[i].clone();
                    if w.len() == radius {
                        continue;
                    }
                    for g in 1..=rank as i16 {
                        for letter in [g, -g] {
                            if w.last() == Some(&-letter) {
                                continue; // would cancel, not reduced
                            }
                            let mut next = w.clone();
                            next.push(letter);
                            if words.len() + 1 > budget {
                                return Err(MetricError::BudgetExceeded {
                                    requested: words.len() + 1,
                                    budget,
                                });
                            }
                            words.push(next);
                            queue.push_back(words.len() - 1);
                        }
                    }
                }
                MetricSpace {
                    backend: Arc::new(Backend::Paths { words, free_group: true }),
                    warp: 0,
                    tag: GeneratorTag::CayleyBall { group, radius },
                }
            }
        };
        PointedSpace::new(space, PointId(0))
    }

    /// Complete rooted tree with unit edge lengths and the path metric.
    pub fn tree(branching: usize, depth: usize, budget: usize) -> Result<PointedSpace, MetricError> {
        if branching == 0 {
            return Err(MetricError::BadParameter("tree branching must be >= 1".into()));
        }
        let mut words: Vec<Vec<i16>> = vec![Vec::new()];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(0usize);
        while let Some(i) = queue.pop_front() {
            let w = words[i].clone();
            if w.len() == depth {
                continue;
            }
            for child in 0..branching {
                let mut next = w.clone();
                next.push(child as i16 + 1);
                if words.len() + 1 > budget {
                    return Err(MetricError::BudgetExceeded { requested: words.len() + 1, budget });
                }
                words.push(next);
                queue.push_back(words.len() - 1);
            }
        }
        let space = MetricSpace {
            backend: Arc::new(Backend::Paths { words, free_group: false }),
            warp: 0,
            tag: GeneratorTag::Tree { branching, depth },
        };
        PointedSpace::new(space, PointId(0))
    }

    pub fn len(&self) -> usize {
        self.backend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> {
        (0..self.len()).map(PointId)
    }

    pub fn label(&self, p: PointId) -> String {
        self.backend.label(p.0)
    }

    pub fn tag(&self) -> &GeneratorTag {
        &self.tag
    }

    /// Remetrization level: number of `ln(1+d)` layers (negative for
    /// formal `e^d - 1` layers).
    pub fn warp_level(&self) -> i32 {
        self.warp
    }

    /// Human-readable generator tag, wrapping per remetrization level,
    /// e.g. `remetrized(grid)`.
    pub fn tag_string(&self) -> String {
        let mut s = self.tag.base_name().to_string();
        for _ in 0..self.warp.max(0) {
            s = format!("remetrized({s})");
        }
        for _ in 0..(-self.warp).max(0) {
            s = format!("inverse-remetrized({s})");
        }
        s
    }

    pub fn dist(&self, a: PointId, b: PointId) -> f64 {
        warp_apply(self.backend.dist(a.0, b.0), self.warp)
    }

    /// Same point set with distances `ln(1 + d)`.
    pub fn log_remetrize(&self) -> MetricSpace {
        MetricSpace {
            backend: Arc::clone(&self.backend),
            warp: self.warp + 1,
            tag: self.tag.clone(),
        }
    }

    /// Same point set with distances `e^d - 1`. Exact inverse of
    /// `log_remetrize`; applying it to a base space performs the map
    /// formally (the result need not satisfy the triangle inequality).
    pub fn inverse_remetrize(&self) -> Result<MetricSpace, MetricError> {
        let new_warp = self.warp - 1;
        if new_warp < 0 {
            // Applying a genuine exponential layer: check for overflow at
            // the largest distance.
            let (d, a, b) = self.max_distance_with_pair();
            if !warp_apply(self.backend.dist(a, b), new_warp).is_finite() {
                return Err(MetricError::Overflow { a, b, dist: d });
            }
        }
        Ok(MetricSpace {
            backend: Arc::clone(&self.backend),
            warp: new_warp,
            tag: self.tag.clone(),
        })
    }

    /// Largest distance in the current metric together with a realizing
    /// pair of point indices.
    fn max_distance_with_pair(&self) -> (f64, usize, usize) {
        let n = self.len();
        if n < 2 {
            return (0.0, 0, 0);
        }
        let (a, b) = match &*self.backend {
            Backend::Lattice { dim, coords, monotone1d, .. } => {
                if *monotone1d {
                    (0, n - 1)
                } else if n <= DEFAULT_POINT_BUDGET {
                    self.scan_max_pair()
                } else {
                    // bounding-box corners; exact for box-shaped lattices
                    let mut lo = vec![i64::MAX; *dim];
                    let mut hi = vec![i64::MIN; *dim];
                    let mut lo_idx = vec![0usize; *dim];
                    let mut hi_idx = vec![0usize; *dim];
                    for i in 0..n {
                        for k in 0..*dim {
                            let c = coords[i * dim + k];
                            if c < lo[k] {
                                lo[k] = c;
                                lo_idx[k] = i;
                            }
                            if c > hi[k] {
                                hi[k] = c;
                                hi_idx[k] = i;
                            }
                        }
                    }
                    let mut best = (0usize, 0usize);
                    let mut best_d = -1.0;
                    for k in 0..*dim {
                        let d = self.backend.dist(lo_idx[k], hi_idx[k]);
                        if d > best_d {
                            best_d = d;
                            best = (lo_idx[k], hi_idx[k]);
                        }
                    }
                    best
                }
            }
            _ => {
                if n <= DEFAULT_POINT_BUDGET {
                    self.scan_max_pair()
                } else {
                    // deepest two words diverging at the root
                    self.scan_max_pair()
                }
            }
        };
        (self.dist(PointId(a), PointId(b)), a, b)
    }

    fn scan_max_pair(&self) -> (usize, usize) {
        let n = self.len();
        let mut best = (0, 0);
        let mut best_d = -1.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.backend.dist(i, j);
                if d > best_d {
                    best_d = d;
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Largest pairwise distance (the diameter of the truncation).
    pub fn diameter(&self) -> f64 {
        self.max_distance_with_pair().0
    }

    /// Checks all four metric axioms; `O(n^3)` over all triples.
    pub fn check_metric_axioms(&self, tol: f64) -> Result<(), AxiomViolation> {
        let n = self.len();
        for a in 0..n {
            for b in (a + 1)..n {
                let d = self.dist(PointId(a), PointId(b));
                if !d.is_finite() {
                    return Err(AxiomViolation::NotFinite { a, b, value: d });
                }
                if d < 0.0 {
                    return Err(AxiomViolation::Negative { a, b, value: d });
                }
                if d == 0.0 {
                    return Err(AxiomViolation::ZeroOffDiagonal { a, b });
                }
                let back = self.dist(PointId(b), PointId(a));
                if (d - back).abs() > tol {
                    return Err(AxiomViolation::Asymmetric { a, b, forward: d, backward: back });
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                if b == a {
                    continue;
                }
                let dab = self.dist(PointId(a), PointId(b));
                for c in (a + 1)..n {
                    if c == b {
                        continue;
                    }
                    let dac = self.dist(PointId(a), PointId(c));
                    let dbc = self.dist(PointId(b), PointId(c));
                    if dac > dab + dbc + tol {
                        return Err(AxiomViolation::Triangle { a, b, c, direct: dac, via: dab + dbc });
                    }
                }
            }
        }
        Ok(())
    }

    /// True when the graph with edges `{x, y : dist <= m}` is connected.
    pub fn is_m_connected(&self, m: f64) -> bool {
        let n = self.len();
        if n <= 1 {
            return true;
        }
        let mut dsu = Dsu::new(n);
        let mut components = n;
        for a in 0..n {
            for b in (a + 1)..n {
                if self.dist(PointId(a), PointId(b)) <= m + DIST_TOL && dsu.union(a, b) {
                    components -= 1;
                    if components == 1 {
                        return true;
                    }
                }
            }
        }
        components == 1
    }

    /// Open ball: all points at distance strictly less than `radius`.
    pub fn ball(&self, center: PointId, radius: f64) -> Vec<PointId> {
        if let Some(range) = self.contiguous_ball(center, radius) {
            return range.map(PointId).collect();
        }
        self.points()
            .filter(|&p| self.dist(center, p) < radius)
            .collect()
    }

    /// For monotone 1-d lattice backends, the open ball is a contiguous
    /// index range found by binary search on the exact distance predicate.
    pub fn contiguous_ball(&self, center: PointId, radius: f64) -> Option<std::ops::Range<usize>> {
        match &*self.backend {
            Backend::Lattice { monotone1d: true, .. } => {
                let n = self.len();
                let ci = center.0;
                if !(self.dist(center, center) < radius) {
                    return Some(ci..ci); // empty: even the center is excluded
                }
                // left edge: first index with dist < radius (predicate is
                // monotone nondecreasing toward the center)
                let mut lo = 0usize;
                let mut hi = ci;
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if self.dist(center, PointId(mid)) < radius {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                let left = lo;
                // right edge: last index with dist < radius
                let mut lo = ci;
                let mut hi = n - 1;
                while lo < hi {
                    let mid = (lo + hi + 1) / 2;
                    if self.dist(center, PointId(mid)) < radius {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                Some(left..lo + 1)
            }
            _ => None,
        }
    }

    /// Converts a radius in this space's metric to the base (unwarped)
    /// metric. Used by interval-ball arithmetic and tests.
    pub fn radius_to_core(&self, radius: f64) -> f64 {
        warp_unapply(radius, self.warp)
    }
}

impl fmt::Debug for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricSpace")
            .field("points", &self.len())
            .field("tag", &self.tag_string())
            .finish()
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            false
        } else {
            self.parent[ra] = rb;
            true
        }
    }
}

/// A metric space with a chosen basepoint; defines the norm `|x|`.
#[derive(Clone, Debug)]
pub struct PointedSpace {
    space: MetricSpace,
    basepoint: PointId,
    norms: Vec<f64>,
}

impl PointedSpace {
    pub fn new(space: MetricSpace, basepoint: PointId) -> Result<Self, MetricError> {
        if basepoint.0 >= space.len() {
            return Err(MetricError::PointOutOfRange { index: basepoint.0, len: space.len() });
        }
        let norms = (0..space.len())
            .map(|i| space.dist(basepoint, PointId(i)))
            .collect();
        Ok(PointedSpace { space, basepoint, norms })
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn basepoint(&self) -> PointId {
        self.basepoint
    }

    /// `|x| = dist(x, basepoint)`.
    pub fn norm(&self, p: PointId) -> f64 {
        self.norms[p.0]
    }

    /// Largest norm over the truncation.
    pub fn truncation_radius(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest strictly positive norm, if any.
    pub fn min_positive_norm(&self) -> Option<f64> {
        self.norms
            .iter()
            .cloned()
            .filter(|&v| v > 0.0)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    /// Same basepoint over the log-remetrized space.
    pub fn log_remetrize(&self) -> PointedSpace {
        PointedSpace::new(self.space.log_remetrize(), self.basepoint)
            .expect("basepoint stays in range")
    }
}

/// A total assignment of source points to target points.
pub struct PointMap<'a> {
    pub source: &'a MetricSpace,
    pub target: &'a MetricSpace,
    assignment: Vec<PointId>,
}

impl<'a> PointMap<'a> {
    pub fn new(
        source: &'a MetricSpace,
        target: &'a MetricSpace,
        assignment: Vec<PointId>,
    ) -> Result<Self, MetricError> {
        if assignment.len() != source.len() {
            return Err(MetricError::MalformedTable(format!(
                "assignment covers {} of {} source points",
                assignment.len(),
                source.len()
            )));
        }
        for &t in &assignment {
            if t.0 >= target.len() {
                return Err(MetricError::PointOutOfRange { index: t.0, len: target.len() });
            }
        }
        Ok(PointMap { source, target, assignment })
    }

    pub fn apply(&self, p: PointId) -> PointId {
        self.assignment[p.0]
    }

    /// True iff the map is a bijection preserving every pairwise distance
    /// within `tol`.
    pub fn is_isometry(&self, tol: f64) -> bool {
        let n = self.source.len();
        if self.target.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for &t in &self.assignment {
            if seen[t.0] {
                return false;
            }
            seen[t.0] = true;
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let d_src = self.source.dist(PointId(a), PointId(b));
                let d_tgt = self.target.dist(self.apply(PointId(a)), self.apply(PointId(b)));
                if (d_src - d_tgt).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dim: usize, side: usize, norm: GridNorm) -> MetricSpace {
        MetricSpace::grid(dim, side, norm, DEFAULT_POINT_BUDGET).unwrap()
    }

    #[test]
    fn grid_1d_two_points() {
        let g = grid(1, 2, GridNorm::L1);
        assert_eq!(g.len(), 2);
        assert_eq!(g.dist(PointId(0), PointId(1)), 1.0);
    }

    #[test]
    fn grid_2d_unit_square_linf() {
        let g = grid(2, 2, GridNorm::Linf);
        assert_eq!(g.len(), 4);
        for a in g.points() {
            for b in g.points() {
                if a != b {
                    assert_eq!(g.dist(a, b), 1.0);
                }
            }
        }
    }

    #[test]
    fn grid_2d_l1_corner_distance() {
        let g = grid(2, 3, GridNorm::L1);
        // lex order: (0,0) is index 0 and (2,2) is index 8
        assert_eq!(g.label(PointId(0)), "(0,0)");
        assert_eq!(g.label(PointId(8)), "(2,2)");
        assert_eq!(g.dist(PointId(0), PointId(8)), 4.0);
    }

    #[test]
    fn grid_budget_enforced() {
        let err = MetricSpace::grid(3, 17, GridNorm::L1, DEFAULT_POINT_BUDGET).unwrap_err();
        match err {
            MetricError::BudgetExceeded { requested, budget } => {
                assert_eq!(requested, 4913);
                assert_eq!(budget, 4096);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cayley_free_abelian_rank1_is_interval() {
        let ball = MetricSpace::cayley_ball(GroupKind::FreeAbelian { rank: 1 }, 3, 1000).unwrap();
        assert_eq!(ball.space().len(), 7);
        assert_eq!(ball.basepoint(), PointId(0));
        assert_eq!(ball.norm(PointId(0)), 0.0);
        // distances are |a - b| on the stored coordinates
        for a in ball.space().points() {
            for b in ball.space().points() {
                let ca: i64 = ball.space().label(a).parse().unwrap();
                let cb: i64 = ball.space().label(b).parse().unwrap();
                assert_eq!(ball.space().dist(a, b), (ca - cb).abs() as f64);
            }
        }
    }

    /// Independent oracle: word-metric distances inside the ball by BFS
    /// over the unit-step adjacency graph.
    fn bfs_distances(space: &MetricSpace, from: PointId) -> Vec<usize> {
        let n = space.len();
        let mut dist = vec![usize::MAX; n];
        dist[from.0] = 0;
        let mut queue = std::collections::VecDeque::from([from.0]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if dist[v] == usize::MAX && space.dist(PointId(u), PointId(v)) == 1.0 {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    #[test]
    fn cayley_free_rank2_radius2_has_17_points() {
        let ball = MetricSpace::cayley_ball(GroupKind::Free { rank: 2 }, 2, 1000).unwrap();
        assert_eq!(ball.space().len(), 17); // 1 + 4 + 12
        // closed-form tree distances agree with BFS over unit steps
        for from in ball.space().points() {
            let oracle = bfs_distances(ball.space(), from);
            for to in ball.space().points() {
                assert_eq!(ball.space().dist(from, to), oracle[to.0] as f64);
            }
        }
    }

    #[test]
    fn cayley_free_rank_growth_matches_formula() {
        // |B_r| = 1 + sum_{i=1..r} 2k (2k-1)^(i-1)
        for rank in 1..=2usize {
            for radius in 0..=3usize {
                let ball =
                    MetricSpace::cayley_ball(GroupKind::Free { rank }, radius, 100_000).unwrap();
                let mut expect = 1usize;
                let mut layer = 2 * rank;
                for _ in 1..=radius {
                    expect += layer;
                    layer *= 2 * rank - 1;
                }
                assert_eq!(ball.space().len(), expect);
            }
        }
    }

    #[test]
    fn cayley_free_abelian_rank2_radius1() {
        let ball = MetricSpace::cayley_ball(GroupKind::FreeAbelian { rank: 2 }, 1, 1000).unwrap();
        assert_eq!(ball.space().len(), 5);
        let find = |label: &str| {
            ball.space()
                .points()
                .find(|&p| ball.space().label(p) == label)
                .unwrap()
        };
        let e10 = find("(1,0)");
        let e01 = find("(0,1)");
        assert_eq!(ball.space().dist(e10, e01), 2.0);
        // word-metric BFS oracle inside the ball agrees
        let oracle = bfs_distances(ball.space(), e10);
        assert_eq!(oracle[e01.0], 2);
    }

    #[test]
    fn cayley_balls_are_1_connected() {
        let a = MetricSpace::cayley_ball(GroupKind::FreeAbelian { rank: 2 }, 3, 1000).unwrap();
        let f = MetricSpace::cayley_ball(GroupKind::Free { rank: 2 }, 3, 1000).unwrap();
        assert!(a.space().is_m_connected(1.0));
        assert!(f.space().is_m_connected(1.0));
    }

    #[test]
    fn tree_distances() {
        let t = MetricSpace::tree(2, 2, 1000).unwrap();
        assert_eq!(t.space().len(), 7);
        let find = |label: &str| {
            t.space()
                .points()
                .find(|&p| t.space().label(p) == label)
                .unwrap()
        };
        let leaf00 = find("0.0");
        let leaf01 = find("0.1");
        let leaf10 = find("1.0");
        assert_eq!(t.norm(leaf00), 2.0);
        assert_eq!(t.space().dist(leaf00, leaf01), 2.0);
        assert_eq!(t.space().dist(leaf00, leaf10), 4.0);
    }

    #[test]
    fn log_remetrize_closed_forms() {
        let rows = vec![vec![std::f64::consts::E - 1.0]];
        let s = MetricSpace::from_matrix(rows, None).unwrap();
        let sp = s.log_remetrize();
        assert!((sp.dist(PointId(0), PointId(1)) - 1.0).abs() < 1e-12);

        let rows = vec![vec![std::f64::consts::E.powi(2) - 1.0]];
        let s = MetricSpace::from_matrix(rows, None).unwrap();
        let sp = s.log_remetrize();
        let d = sp.dist(PointId(0), PointId(1));
        assert!((d - 2.0).abs() < 1e-12);
        assert!(d <= s.dist(PointId(0), PointId(1)));
    }

    #[test]
    fn inverse_remetrize_round_trip() {
        let rows = vec![vec![7.25]];
        let s = MetricSpace::from_matrix(rows, None).unwrap();
        let back = s.log_remetrize().inverse_remetrize().unwrap();
        let d = back.dist(PointId(0), PointId(1));
        assert!((d - 7.25).abs() / 7.25 < 1e-9);
        assert_eq!(back.warp_level(), 0);
    }

    #[test]
    fn inverse_remetrize_closed_forms() {
        let rows = vec![vec![1.0]];
        let s = MetricSpace::from_matrix(rows, None).unwrap();
        let e = s.inverse_remetrize().unwrap();
        assert!((e.dist(PointId(0), PointId(1)) - (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn inverse_remetrize_overflow_names_pair() {
        let rows = vec![vec![800.0]];
        let s = MetricSpace::from_matrix(rows, None).unwrap();
        match s.inverse_remetrize() {
            Err(MetricError::Overflow { a, b, .. }) => {
                assert_eq!((a, b), (0, 1));
            }
            other => panic!("expected overflow, got {:?}", other.map(|s| s.tag_string())),
        }
    }

    #[test]
    fn m_connected_examples() {
        let single = grid(1, 1, GridNorm::L1);
        assert!(single.is_m_connected(0.5));

        let rows = vec![vec![5.0]];
        let two = MetricSpace::from_matrix(rows, None).unwrap();
        assert!(!two.is_m_connected(4.0));
        assert!(two.is_m_connected(5.0));

        let interval = grid(1, 11, GridNorm::L1);
        assert!(interval.is_m_connected(1.0));
        assert!(!interval.is_m_connected(0.5));
    }

    #[test]
    fn isometry_examples() {
        let g = grid(1, 6, GridNorm::L1);
        let id = PointMap::new(&g, &g, g.points().collect()).unwrap();
        assert!(id.is_isometry(DIST_TOL));

        let refl: Vec<PointId> = (0..6).map(|i| PointId(5 - i)).collect();
        let refl = PointMap::new(&g, &g, refl).unwrap();
        assert!(refl.is_isometry(DIST_TOL));

        let collapse: Vec<PointId> = (0..6).map(|i| PointId(if i == 5 { 0 } else { i })).collect();
        let collapse = PointMap::new(&g, &g, collapse).unwrap();
        assert!(!collapse.is_isometry(DIST_TOL));
    }

    #[test]
    fn ball_examples() {
        let z = MetricSpace::interval(-5, 5, 100).unwrap();
        let center = z.points().find(|&p| z.label(p) == "0").unwrap();
        assert!(z.ball(center, 0.0).is_empty());
        let b = z.ball(center, 2.5);
        let labels: Vec<i64> = b.iter().map(|&p| z.label(p).parse().unwrap()).collect();
        assert_eq!(labels, vec![-2, -1, 0, 1, 2]);
        assert_eq!(z.ball(center, 100.0).len(), 11);
    }

    #[test]
    fn contiguous_ball_matches_scan_after_warp() {
        let z = MetricSpace::interval(0, 400, 1000).unwrap().log_remetrize();
        for center in [0usize, 13, 200, 400] {
            for radius in [0.0, 0.3, 1.0, 2.5, 7.0] {
                let fast = z.ball(PointId(center), radius);
                let slow: Vec<PointId> = z
                    .points()
                    .filter(|&p| z.dist(PointId(center), p) < radius)
                    .collect();
                assert_eq!(fast, slow, "center {center} radius {radius}");
            }
        }
    }

    #[test]
    fn from_matrix_rejects_triangle_violation() {
        let rows = vec![vec![1.0], vec![1.0, 5.0]];
        match MetricSpace::from_matrix(rows, None) {
            Err(MetricError::Axiom(AxiomViolation::Triangle { .. })) => {}
            other => panic!("expected triangle violation, got {:?}", other.is_ok()),
        }
    }
}
