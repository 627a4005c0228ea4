//! Clipped, Lloyd-relaxed Voronoi tilings of convex regions, optionally with
//! a convex hole removed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VemError};
use crate::polykernel::signed_area;

type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiOptions {
    pub lloyd_iterations: usize,
    pub seed: u64,
}

impl Default for VoronoiOptions {
    fn default() -> Self {
        Self {
            lloyd_iterations: 40,
            seed: 0,
        }
    }
}

/// Voronoi cells of `n_seeds` relaxed seeds in the convex CCW polygon
/// `domain`, minus the convex CCW polygon `hole` when given.
///
/// Cells touching the hole are `C \ hole` and may have reflex vertices at
/// hole corners; all other cells are convex.
pub fn lloyd_voronoi(
    domain: &[Point],
    hole: Option<&[Point]>,
    n_seeds: usize,
    opts: VoronoiOptions,
) -> Result<Vec<Vec<Point>>> {
    if n_seeds == 0 {
        return Err(VemError::InvalidArgument("no seeds".into()));
    }
    let (lo, hi) = bbox(domain);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seeds = Vec::with_capacity(n_seeds);
    let mut guard = 0usize;
    while seeds.len() < n_seeds {
        guard += 1;
        if guard > 1000 * n_seeds + 1000 {
            return Err(VemError::Refinement("could not place seeds".into()));
        }
        let p = [
            rng.random_range(lo[0]..hi[0]),
            rng.random_range(lo[1]..hi[1]),
        ];
        if inside_convex(domain, p) && hole.is_none_or(|h| !inside_convex(h, p)) {
            seeds.push(p);
        }
    }
    let mut cells = Vec::new();
    for it in 0..=opts.lloyd_iterations {
        cells = clipped_cells(&seeds, domain, hole)?;
        if it == opts.lloyd_iterations {
            break;
        }
        for (s, pieces) in seeds.iter_mut().zip(&cells) {
            let Some(c) = union_centroid(pieces) else {
                continue;
            };
            if hole.is_none_or(|h| !inside_convex(h, c)) {
                *s = c;
            }
        }
    }
    Ok(cells.into_iter().flatten().filter(|c| c.len() >= 3).collect())
}

fn union_centroid(pieces: &[Vec<Point>]) -> Option<Point> {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for p in pieces.iter().filter(|p| p.len() >= 3) {
        let w = signed_area(p);
        let c = centroid(p);
        a += w;
        cx += w * c[0];
        cy += w * c[1];
    }
    (a > 0.0).then(|| [cx / a, cy / a])
}

/// Cell pieces of every seed (one piece unless a hole splits the cell).
fn clipped_cells(
    seeds: &[Point],
    domain: &[Point],
    hole: Option<&[Point]>,
) -> Result<Vec<Vec<Vec<Point>>>> {
    let grid = SeedGrid::new(seeds);
    let mut out = Vec::with_capacity(seeds.len());
    for (i, &s) in seeds.iter().enumerate() {
        let mut cell = domain.to_vec();
        let mut ring = 0usize;
        loop {
            for j in grid.ring(s, ring) {
                if j == i {
                    continue;
                }
                let q = seeds[j];
                let n = [q[0] - s[0], q[1] - s[1]];
                let m = [0.5 * (q[0] + s[0]), 0.5 * (q[1] + s[1])];
                cell = clip_half_plane(&cell, n, n[0] * m[0] + n[1] * m[1]);
            }
            let reach = cell
                .iter()
                .map(|p| (p[0] - s[0]).hypot(p[1] - s[1]))
                .fold(0.0, f64::max);
            if ring as f64 * grid.size >= 2.0 * reach || ring > grid.max_ring() {
                break;
            }
            ring += 1;
        }
        out.push(match hole {
            Some(h) => subtract_convex(&cell, h)?,
            None => vec![cell],
        });
    }
    Ok(out)
}

struct SeedGrid {
    origin: Point,
    size: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn new(seeds: &[Point]) -> Self {
        let (lo, hi) = bbox(seeds);
        let w = (hi[0] - lo[0]).max(1e-300);
        let ht = (hi[1] - lo[1]).max(1e-300);
        let size = ((w * ht) / seeds.len() as f64).sqrt().max(w.max(ht) / 4096.0);
        let nx = ((w / size).ceil() as usize).max(1);
        let ny = ((ht / size).ceil() as usize).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        let mut g = Self {
            origin: lo,
            size,
            nx,
            ny,
            bins: Vec::new(),
        };
        for (i, &p) in seeds.iter().enumerate() {
            let (bx, by) = g.bin(p);
            bins[by * nx + bx].push(i);
        }
        g.bins = bins;
        g
    }

    fn bin(&self, p: Point) -> (usize, usize) {
        let bx = ((p[0] - self.origin[0]) / self.size).floor().max(0.0) as usize;
        let by = ((p[1] - self.origin[1]) / self.size).floor().max(0.0) as usize;
        (bx.min(self.nx - 1), by.min(self.ny - 1))
    }

    fn max_ring(&self) -> usize {
        self.nx.max(self.ny)
    }

    /// Seeds in the bins at Chebyshev distance exactly `r` from the bin of `p`.
    fn ring(&self, p: Point, r: usize) -> Vec<usize> {
        let (bx, by) = self.bin(p);
        let (bx, by, r) = (bx as isize, by as isize, r as isize);
        let mut out = Vec::new();
        for y in by - r..=by + r {
            for x in bx - r..=bx + r {
                if (x - bx).abs().max((y - by).abs()) != r {
                    continue;
                }
                if x < 0 || y < 0 || x >= self.nx as isize || y >= self.ny as isize {
                    continue;
                }
                out.extend_from_slice(&self.bins[y as usize * self.nx + x as usize]);
            }
        }
        out
    }
}

pub(crate) fn bbox(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Keep the part of a convex polygon with `n . x <= c`.
pub(crate) fn clip_half_plane(poly: &[Point], n: Point, c: f64) -> Vec<Point> {
    let m = poly.len();
    let mut out = Vec::with_capacity(m + 1);
    for i in 0..m {
        let p = poly[i];
        let q = poly[(i + 1) % m];
        let fp = n[0] * p[0] + n[1] * p[1] - c;
        let fq = n[0] * q[0] + n[1] * q[1] - c;
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

pub(crate) fn inside_convex(poly: &[Point], p: Point) -> bool {
    (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) > 0.0
    })
}

pub(crate) fn centroid(poly: &[Point]) -> Point {
    let a = signed_area(poly);
    let n = poly.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let cr = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

struct Crossing {
    c_edge: usize,
    s: f64,
    h_edge: usize,
    u: f64,
    point: Point,
    exit: bool,
}

/// `cell \ hole` for convex CCW polygons, as one or more CCW polygons.
/// Pieces touching the hole may have reflex vertices at hole corners.
pub(crate) fn subtract_convex(cell: &[Point], hole: &[Point]) -> Result<Vec<Vec<Point>>> {
    let nc = cell.len();
    let nh = hole.len();
    let mut xs: Vec<Crossing> = Vec::new();
    for i in 0..nc {
        let p = cell[i];
        let q = cell[(i + 1) % nc];
        let r = [q[0] - p[0], q[1] - p[1]];
        for j in 0..nh {
            let a = hole[j];
            let b = hole[(j + 1) % nh];
            let d = [b[0] - a[0], b[1] - a[1]];
            let den = r[0] * d[1] - r[1] * d[0];
            if den == 0.0 {
                continue;
            }
            let w = [a[0] - p[0], a[1] - p[1]];
            let s = (w[0] * d[1] - w[1] * d[0]) / den;
            let u = (w[0] * r[1] - w[1] * r[0]) / den;
            if (0.0..1.0).contains(&s) && (0.0..1.0).contains(&u) {
                xs.push(Crossing {
                    c_edge: i,
                    s,
                    h_edge: j,
                    u,
                    point: [p[0] + s * r[0], p[1] + s * r[1]],
                    // outward normal of the hole edge is (d_y, -d_x)
                    exit: r[0] * d[1] - r[1] * d[0] > 0.0,
                });
            }
        }
    }
    if xs.is_empty() {
        if inside_convex(hole, centroid(cell)) {
            return Ok(Vec::new());
        }
        if hole.iter().any(|&v| inside_convex(cell, v)) {
            return Err(VemError::Refinement("inclusion lies inside a single cell".into()));
        }
        return Ok(vec![cell.to_vec()]);
    }
    let m = xs.len();
    let exits = xs.iter().filter(|x| x.exit).count();
    if !m.is_multiple_of(2) || 2 * exits != m {
        return Err(VemError::Refinement(format!(
            "inconsistent cell/inclusion crossings ({m})"
        )));
    }
    let mut c_order: Vec<usize> = (0..m).collect();
    c_order.sort_by(|&a, &b| (xs[a].c_edge, xs[a].s).partial_cmp(&(xs[b].c_edge, xs[b].s)).unwrap());
    let mut h_order: Vec<usize> = (0..m).collect();
    h_order.sort_by(|&a, &b| (xs[a].h_edge, xs[a].u).partial_cmp(&(xs[b].h_edge, xs[b].u)).unwrap());
    let mut c_pos = vec![0; m];
    let mut h_pos = vec![0; m];
    for k in 0..m {
        c_pos[c_order[k]] = k;
        h_pos[h_order[k]] = k;
    }

    let mut visited = vec![false; m];
    let mut pieces = Vec::new();
    for start in 0..m {
        if !xs[start].exit || visited[start] {
            continue;
        }
        let mut poly = Vec::new();
        let mut cur = start;
        for _ in 0..=m {
            visited[cur] = true;
            let a = &xs[cur];
            poly.push(a.point);
            // along the cell boundary to the next crossing, an entry
            let nxt = c_order[(c_pos[cur] + 1) % m];
            let b = &xs[nxt];
            if b.exit {
                return Err(VemError::Refinement("crossings do not alternate".into()));
            }
            if !(a.c_edge == b.c_edge && b.s > a.s) {
                let mut i = (a.c_edge + 1) % nc;
                loop {
                    poly.push(cell[i]);
                    if i == b.c_edge {
                        break;
                    }
                    i = (i + 1) % nc;
                }
            }
            poly.push(b.point);
            // backwards along the hole boundary to the previous crossing, an exit
            let prv = h_order[(h_pos[nxt] + m - 1) % m];
            let c = &xs[prv];
            if !(c.h_edge == b.h_edge && c.u < b.u) {
                let mut j = b.h_edge;
                loop {
                    poly.push(hole[j]);
                    j = (j + nh - 1) % nh;
                    if j == c.h_edge {
                        break;
                    }
                }
            }
            cur = prv;
            if cur == start {
                break;
            }
        }
        if cur != start {
            return Err(VemError::Refinement("unterminated inclusion cut".into()));
        }
        if signed_area(&poly) <= 0.0 {
            return Err(VemError::Refinement("inclusion cut produced an inverted cell".into()));
        }
        pieces.push(poly);
    }
    Ok(pieces)
}
