//! Mesh generators: structured rectangles and polygonal tilings of the unit
//! square with a square or circular elastic inclusion.

use serde::{Deserialize, Serialize};

use super::merge::{merge_meshes, snap_points};
use super::voronoi::{lloyd_voronoi, VoronoiOptions};
use super::{PolygonalMesh, Subdomain};
use crate::error::{Result, VemError};
use crate::polykernel::{diameter, signed_area};

type Point = [f64; 2];

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn corners(&self) -> Vec<Point> {
        vec![
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        ]
    }

    pub fn diameter(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    fn is_valid(&self) -> bool {
        self.x1 > self.x0 && self.y1 > self.y0 && self.diameter().is_finite()
    }
}

/// Structured `nx x ny` grid of quadrilaterals, all tagged `tag`.
pub fn build_rect_grid(domain: Rect, nx: usize, ny: usize, tag: Subdomain) -> Result<PolygonalMesh> {
    if nx == 0 || ny == 0 {
        return Err(VemError::InvalidArgument(format!("grid counts {nx} x {ny}")));
    }
    if !domain.is_valid() {
        return Err(VemError::InvalidArgument(format!("degenerate rectangle {domain:?}")));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = domain.y0 + (domain.y1 - domain.y0) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = domain.x0 + (domain.x1 - domain.x0) * i as f64 / nx as f64;
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonalMesh::new(vertices, cells, vec![tag; nx * ny])
}

/// Shape of the elastic inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum InclusionShape {
    Square { lo: Point, hi: Point },
    /// Approximated by an inscribed regular polygon.
    Circle { center: Point, radius: f64 },
}

/// Elastic inclusion inside a rectangular domain; the rest is poroelastic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubdomainSpec {
    pub domain: Rect,
    pub inclusion: InclusionShape,
    /// Target size of elastic cells relative to poroelastic ones.
    pub elastic_ratio: f64,
}

impl SubdomainSpec {
    /// Unit square with the elastic square `(0.25, 0.75)^2`.
    pub fn square_inclusion() -> Self {
        Self {
            domain: Rect::new(0.0, 0.0, 1.0, 1.0),
            inclusion: InclusionShape::Square {
                lo: [0.25, 0.25],
                hi: [0.75, 0.75],
            },
            elastic_ratio: 0.75,
        }
    }

    /// Unit square with the elastic disc of radius 1/4 centred at (1/2, 1/2).
    pub fn circle_inclusion() -> Self {
        Self {
            domain: Rect::new(0.0, 0.0, 1.0, 1.0),
            inclusion: InclusionShape::Circle {
                center: [0.5, 0.5],
                radius: 0.25,
            },
            elastic_ratio: 0.75,
        }
    }

    fn feature_size(&self) -> f64 {
        match self.inclusion {
            InclusionShape::Square { lo, hi } => (hi[0] - lo[0]).min(hi[1] - lo[1]),
            InclusionShape::Circle { radius, .. } => 2.0 * radius,
        }
    }

    /// Number of sides of the polygon approximating a circular inclusion.
    pub fn circle_sides(radius: f64, target_h: f64) -> usize {
        ((2.0 * std::f64::consts::PI * radius / (0.5 * target_h)).ceil() as usize).max(8)
    }
}

/// Generator parameters recorded in run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub target_h: f64,
    pub achieved_h: f64,
    pub seed: u64,
    pub lloyd_iterations: usize,
    pub seeds_per_piece: Vec<usize>,
    pub interface_sides: Option<usize>,
}

const LLOYD_ITERATIONS: usize = 30;
const MAX_ATTEMPTS: usize = 6;

/// Lloyd-relaxed Voronoi tilings of each subdomain, merged along the
/// interface. Boundary edges are left untagged.
pub fn build_polygonal_mesh(
    spec: &SubdomainSpec,
    target_h: f64,
    seed: u64,
) -> Result<(PolygonalMesh, GeneratorInfo)> {
    if !spec.domain.is_valid() {
        return Err(VemError::InvalidArgument(format!("degenerate domain {:?}", spec.domain)));
    }
    if !(target_h > 0.0) || target_h >= spec.domain.diameter() {
        return Err(VemError::Refinement(format!(
            "target h {target_h} is not below the domain diameter"
        )));
    }
    if target_h >= spec.feature_size() {
        return Err(VemError::Refinement(format!(
            "target h {target_h} does not resolve the inclusion (size {})",
            spec.feature_size()
        )));
    }
    let target_e = spec.elastic_ratio * target_h;
    let d = spec.domain;
    let mut parts = Vec::new();
    let mut seeds = Vec::new();
    let mut sides = None;
    match spec.inclusion {
        InclusionShape::Square { lo, hi } => {
            let strips = [
                Rect::new(d.x0, d.y0, d.x1, lo[1]),
                Rect::new(d.x0, hi[1], d.x1, d.y1),
                Rect::new(d.x0, lo[1], lo[0], hi[1]),
                Rect::new(hi[0], lo[1], d.x1, hi[1]),
            ];
            for (i, r) in strips.iter().enumerate() {
                if r.is_valid() {
                    let (m, n) = tuned_piece(&r.corners(), None, target_h, seed + i as u64, Subdomain::Poro)?;
                    parts.push(m);
                    seeds.push(n);
                }
            }
            let inner = Rect::new(lo[0], lo[1], hi[0], hi[1]);
            let (m, n) = tuned_piece(&inner.corners(), None, target_e, seed + 7, Subdomain::Elastic)?;
            parts.push(m);
            seeds.push(n);
        }
        InclusionShape::Circle { center, radius } => {
            let n = SubdomainSpec::circle_sides(radius, target_e);
            sides = Some(n);
            let ngon: Vec<Point> = (0..n)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect();
            let (m, s) = tuned_piece(&d.corners(), Some(&ngon), target_h, seed, Subdomain::Poro)?;
            parts.push(m);
            seeds.push(s);
            let (m, s) = tuned_piece(&ngon, None, target_e, seed + 7, Subdomain::Elastic)?;
            parts.push(m);
            seeds.push(s);
        }
    }
    let refs: Vec<&PolygonalMesh> = parts.iter().collect();
    let mesh = merge_meshes(&refs)?;
    let info = GeneratorInfo {
        target_h,
        achieved_h: mesh.h(),
        seed,
        lloyd_iterations: LLOYD_ITERATIONS,
        seeds_per_piece: seeds,
        interface_sides: sides,
    };
    Ok((mesh, info))
}

/// Mesh one convex piece, adjusting the seed count until the largest cell
/// diameter is close to `target`.
fn tuned_piece(
    region: &[Point],
    hole: Option<&[Point]>,
    target: f64,
    seed: u64,
    tag: Subdomain,
) -> Result<(PolygonalMesh, usize)> {
    let mut area = signed_area(region);
    if let Some(h) = hole {
        area -= signed_area(h);
    }
    let mut n = ((area / (0.5 * target * target)).ceil() as usize).max(1);
    let mut best: Option<(f64, PolygonalMesh, usize)> = None;
    for _ in 0..MAX_ATTEMPTS {
        let opts = VoronoiOptions {
            lloyd_iterations: LLOYD_ITERATIONS,
            seed,
        };
        let cells = lloyd_voronoi(region, hole, n, opts)?;
        let mesh = mesh_from_polygons(cells, tag, target)?;
        let h = mesh.h();
        let ratio = h / target;
        let score = if ratio <= 1.0 { 1.0 - ratio } else { 10.0 * (ratio - 1.0) };
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, mesh, n));
        }
        if (0.9..=1.05).contains(&ratio) {
            break;
        }
        let next = ((n as f64) * (ratio / 0.97).powi(2)).round() as usize;
        n = if next == n { n + 1 } else { next.max(1) };
    }
    let (_, mesh, n) = best.expect("at least one attempt");
    if mesh.h() > 1.2 * target {
        return Err(VemError::Refinement(format!(
            "could not reach h <= 1.2 * {target} (got {})",
            mesh.h()
        )));
    }
    Ok((mesh, n))
}

/// Build a conforming mesh from cell polygons that share vertices up to
/// round-off.
pub(crate) fn mesh_from_polygons(
    polys: Vec<Vec<Point>>,
    tag: Subdomain,
    scale: f64,
) -> Result<PolygonalMesh> {
    let tol = 1e-9 * scale;
    let flat: Vec<Point> = polys.iter().flatten().copied().collect();
    let (vertices, remap) = snap_points(&flat, tol);
    let mut cells = Vec::with_capacity(polys.len());
    let mut k = 0;
    for p in &polys {
        let mut cell: Vec<usize> = remap[k..k + p.len()].to_vec();
        k += p.len();
        cell.dedup();
        while cell.len() > 1 && cell.first() == cell.last() {
            cell.pop();
        }
        if cell.len() < 3 {
            continue;
        }
        let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
        let h = diameter(&pts);
        if signed_area(&pts) <= 1e-12 * h * h {
            continue;
        }
        cells.push(cell);
    }
    // drop vertices of discarded cells
    let mut used = vec![usize::MAX; vertices.len()];
    let mut compact = Vec::new();
    for cell in cells.iter_mut() {
        for v in cell.iter_mut() {
            if used[*v] == usize::MAX {
                used[*v] = compact.len();
                compact.push(vertices[*v]);
            }
            *v = used[*v];
        }
    }
    let n = cells.len();
    let mesh = PolygonalMesh::new(compact, cells, vec![tag; n])?;
    // insert any T-junction vertices produced by round-off
    merge_meshes(&[&mesh])
}

/// Random star-shaped polygon with `n >= 3` vertices, for property tests and
/// benchmarks. Vertices sit at sorted random angles with radii in
/// `[0.5, 1] * scale` around a random centre; consecutive angles are at
/// least 0.6 of the uniform spacing apart.
pub fn random_star_polygon(seed: u64, n: usize, scale: f64) -> Result<Vec<[f64; 2]>> {
    use rand::{Rng, SeedableRng};
    if n < 3 || !(scale > 0.0) {
        return Err(VemError::InvalidArgument(format!(
            "random polygon needs n >= 3 and scale > 0 (got {n}, {scale})"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let gap = std::f64::consts::TAU / n as f64;
    let start: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let cx: f64 = rng.random_range(-1.0..1.0);
    let cy: f64 = rng.random_range(-1.0..1.0);
    Ok((0..n)
        .map(|i| {
            let t = start + gap * (i as f64 + rng.random_range(-0.2..0.2));
            let r = scale * rng.random_range(0.5..1.0);
            [cx * scale + r * t.cos(), cy * scale + r * t.sin()]
        })
        .collect())
}
