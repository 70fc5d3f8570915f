//! Structured triangulated rectangles and their overlapping subdomain decompositions.
//!
//! Nodes are numbered row by row, `n = j * (nx + 1) + i`, with `i` running along x.
//! Every cell is split along its lower-left to upper-right diagonal into two
//! counter-clockwise triangles. Corner nodes carry the Top/Bottom tag.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A side of a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Top => "top",
            Side::Bottom => "bottom",
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }
}

#[derive(Clone, Debug)]
pub struct StructuredGrid {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Rect,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub side_of: Vec<Option<Side>>,
}

/// Builds a uniform `nx x ny` cell grid on `bounds`.
pub fn build_grid(nx: usize, ny: usize, bounds: Rect) -> Result<StructuredGrid> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "cell counts must be positive, got {nx} x {ny}"
        )));
    }
    let finite = [bounds.x0, bounds.x1, bounds.y0, bounds.y1]
        .iter()
        .all(|v| v.is_finite());
    if !finite || bounds.x0 >= bounds.x1 || bounds.y0 >= bounds.y1 {
        return Err(Error::InvalidArgument(format!(
            "invalid bounds {bounds:?}: need x0 < x1 and y0 < y1"
        )));
    }
    let coord = |lo: f64, hi: f64, k: usize, n: usize| {
        if k == n {
            hi
        } else {
            lo + (hi - lo) * (k as f64 / n as f64)
        }
    };
    let xs: Vec<f64> = (0..=nx).map(|i| coord(bounds.x0, bounds.x1, i, nx)).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| coord(bounds.y0, bounds.y1, j, ny)).collect();
    Ok(StructuredGrid::from_axes(nx, ny, bounds, &xs, &ys))
}

impl StructuredGrid {
    fn from_axes(nx: usize, ny: usize, bounds: Rect, xs: &[f64], ys: &[f64]) -> Self {
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut side_of = Vec::with_capacity((nx + 1) * (ny + 1));
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                nodes.push([x, y]);
                let tag = if j == 0 {
                    Some(Side::Bottom)
                } else if j == ny {
                    Some(Side::Top)
                } else if i == 0 {
                    Some(Side::Left)
                } else if i == nx {
                    Some(Side::Right)
                } else {
                    None
                };
                side_of.push(tag);
            }
        }
        let stride = nx + 1;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n00 = j * stride + i;
                let n10 = n00 + 1;
                let n01 = n00 + stride;
                let n11 = n01 + 1;
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            }
        }
        Self {
            nx,
            ny,
            bounds,
            nodes,
            triangles,
            side_of,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % (self.nx + 1), n / (self.nx + 1))
    }

    pub fn is_boundary(&self, n: usize) -> bool {
        self.side_of[n].is_some()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&n| self.is_boundary(n)).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&n| !self.is_boundary(n)).collect()
    }

    /// Signed area of triangle `t` (positive for counter-clockwise vertices).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Sub-grid over the cell window, with node coordinates copied from `self`.
    fn window(&self, w: CellWindow) -> StructuredGrid {
        let xs: Vec<f64> = (w.ix_lo..=w.ix_hi)
            .map(|i| self.nodes[self.node_index(i, 0)][0])
            .collect();
        let ys: Vec<f64> = (w.iy_lo..=w.iy_hi)
            .map(|j| self.nodes[self.node_index(0, j)][1])
            .collect();
        let bounds = Rect::new(xs[0], *xs.last().unwrap(), ys[0], *ys.last().unwrap());
        StructuredGrid::from_axes(w.ix_hi - w.ix_lo, w.iy_hi - w.iy_lo, bounds, &xs, &ys)
    }

    /// Debug dump: `node,x,y,tag`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        );
        let mut body = String::from("node,x,y,tag\n");
        for (n, (p, tag)) in self.nodes.iter().zip(&self.side_of).enumerate() {
            let tag = tag.map_or("interior", Side::name);
            body.push_str(&format!("{n},{},{},{tag}\n", p[0], p[1]));
        }
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    Vertical,
    Horizontal,
    FourSquares,
    Monolithic,
}

impl Layout {
    pub fn subdomain_count(self) -> usize {
        match self {
            Layout::Vertical | Layout::Horizontal => 2,
            Layout::FourSquares => 4,
            Layout::Monolithic => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Vertical => "vertical",
            Layout::Horizontal => "horizontal",
            Layout::FourSquares => "four_squares",
            Layout::Monolithic => "monolithic",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vertical" => Ok(Layout::Vertical),
            "horizontal" => Ok(Layout::Horizontal),
            "four_squares" | "foursquares" | "squares" => Ok(Layout::FourSquares),
            "monolithic" => Ok(Layout::Monolithic),
            other => Err(Error::Config(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecompositionConfig {
    pub layout: Layout,
    /// Number of cell rows/columns shared by neighboring subdomains.
    pub overlap: usize,
}

impl DecompositionConfig {
    pub fn new(layout: Layout, overlap: usize) -> Self {
        Self { layout, overlap }
    }

    pub fn validate(&self, grid: &StructuredGrid) -> Result<()> {
        if self.layout == Layout::Monolithic {
            return Ok(());
        }
        let (split_x, split_y) = match self.layout {
            Layout::Vertical => (true, false),
            Layout::Horizontal => (false, true),
            Layout::FourSquares => (true, true),
            Layout::Monolithic => unreachable!(),
        };
        if self.overlap == 0 {
            return Err(Error::InvalidArgument(format!(
                "{} layout needs overlap >= 1",
                self.layout
            )));
        }
        if self.overlap >= grid.nx.min(grid.ny) {
            return Err(Error::InvalidArgument(format!(
                "overlap {} must be smaller than min(nx, ny) = {}",
                self.overlap,
                grid.nx.min(grid.ny)
            )));
        }
        let half_up = self.overlap.div_ceil(2);
        for (split, n, axis) in [(split_x, grid.nx, "nx"), (split_y, grid.ny, "ny")] {
            if !split {
                continue;
            }
            if n % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{} layout needs even {axis}, got {n}",
                    self.layout
                )));
            }
            if half_up >= n / 2 {
                return Err(Error::InvalidArgument(format!(
                    "overlap {} too large for {axis} = {n}: ceil(overlap/2) must stay below {}",
                    self.overlap,
                    n / 2
                )));
            }
        }
        Ok(())
    }
}

/// Half-open window of parent cells `[ix_lo, ix_hi) x [iy_lo, iy_hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellWindow {
    pub ix_lo: usize,
    pub ix_hi: usize,
    pub iy_lo: usize,
    pub iy_hi: usize,
}

impl CellWindow {
    /// Whether parent node `(i, j)` is a node of the window's grid.
    pub fn contains_node(&self, i: usize, j: usize) -> bool {
        (self.ix_lo..=self.ix_hi).contains(&i) && (self.iy_lo..=self.iy_hi).contains(&j)
    }

    pub fn contains_cell(&self, i: usize, j: usize) -> bool {
        (self.ix_lo..self.ix_hi).contains(&i) && (self.iy_lo..self.iy_hi).contains(&j)
    }
}

/// Local node partition of a subdomain grid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodePartition {
    pub interior: Vec<usize>,
    /// Nodes on the physical boundary of the parent domain.
    pub physical: Vec<usize>,
    /// Transmission nodes, ordered edge by edge (Bottom, Right, Top, Left).
    pub schwarz: Vec<usize>,
}

impl NodePartition {
    /// Boundary ordering used by the operators: physical nodes, then Schwarz nodes.
    pub fn boundary(&self) -> Vec<usize> {
        self.physical.iter().chain(&self.schwarz).copied().collect()
    }
}

/// Part of a subdomain's Schwarz boundary that receives data from one neighbor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GammaEdge {
    pub side: Side,
    /// Index of the supplying subdomain.
    pub neighbor: usize,
    /// Local node indices on this edge. A cross-point node may appear on two edges.
    pub nodes: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Subdomain {
    pub id: usize,
    pub cell_range: CellWindow,
    pub local_grid: StructuredGrid,
    pub parent_of: Vec<usize>,
    pub partition: NodePartition,
    pub gamma_edges: Vec<GammaEdge>,
    pub center: [f64; 2],
}

impl Subdomain {
    /// Local index of a parent node, if the node belongs to this subdomain grid.
    pub fn local_of_parent(&self, parent: &StructuredGrid, p: usize) -> Option<usize> {
        let (i, j) = parent.node_ij(p);
        let w = self.cell_range;
        w.contains_node(i, j)
            .then(|| self.local_grid.node_index(i - w.ix_lo, j - w.iy_lo))
    }

    /// Neighbors that supply the given Schwarz node, in edge order.
    pub fn suppliers_of(&self, local: usize) -> impl Iterator<Item = usize> + '_ {
        self.gamma_edges
            .iter()
            .filter(move |e| e.nodes.contains(&local))
            .map(|e| e.neighbor)
    }
}

/// Splits the cell range `[0, n)` into two overlapping halves.
fn split_halves(n: usize, overlap: usize) -> [(usize, usize); 2] {
    let mid = n / 2;
    [(0, mid + overlap.div_ceil(2)), (mid - overlap / 2, n)]
}

/// Carves the grid into overlapping subdomains, ordered as Ω1, Ω2, ...
pub fn decompose(grid: &StructuredGrid, cfg: DecompositionConfig) -> Result<Vec<Subdomain>> {
    cfg.validate(grid)?;
    let full_x = (0, grid.nx);
    let full_y = (0, grid.ny);
    let windows: Vec<((usize, usize), (usize, usize))> = match cfg.layout {
        Layout::Monolithic => vec![(full_x, full_y)],
        Layout::Vertical => split_halves(grid.nx, cfg.overlap)
            .into_iter()
            .map(|x| (x, full_y))
            .collect(),
        Layout::Horizontal => split_halves(grid.ny, cfg.overlap)
            .into_iter()
            .map(|y| (full_x, y))
            .collect(),
        Layout::FourSquares => {
            let xs = split_halves(grid.nx, cfg.overlap);
            let ys = split_halves(grid.ny, cfg.overlap);
            // bottom-left, bottom-right, top-left, top-right
            vec![(xs[0], ys[0]), (xs[1], ys[0]), (xs[0], ys[1]), (xs[1], ys[1])]
        }
    };
    let windows: Vec<CellWindow> = windows
        .into_iter()
        .map(|((ix_lo, ix_hi), (iy_lo, iy_hi))| CellWindow {
            ix_lo,
            ix_hi,
            iy_lo,
            iy_hi,
        })
        .collect();

    let mut subdomains = Vec::with_capacity(windows.len());
    for (id, &w) in windows.iter().enumerate() {
        let local_grid = grid.window(w);
        let parent_of: Vec<usize> = (0..local_grid.n_nodes())
            .map(|n| {
                let (i, j) = local_grid.node_ij(n);
                grid.node_index(i + w.ix_lo, j + w.iy_lo)
            })
            .collect();
        let (partition, gamma_sides) = partition_nodes(&local_grid, &parent_of, grid);

        let mut gamma_edges = Vec::new();
        for (side, nodes) in gamma_sides {
            let supplier = edge_supplier(grid, &windows, id, side, &nodes, &parent_of)?;
            gamma_edges.push(GammaEdge {
                side,
                neighbor: supplier,
                nodes,
            });
        }
        let center = local_grid.bounds.center();
        subdomains.push(Subdomain {
            id,
            cell_range: w,
            local_grid,
            parent_of,
            partition,
            gamma_edges,
            center,
        });
    }
    Ok(subdomains)
}

/// The unique other subdomain that contains a whole Γ edge and extends past it.
fn edge_supplier(
    grid: &StructuredGrid,
    windows: &[CellWindow],
    me: usize,
    side: Side,
    nodes: &[usize],
    parent_of: &[usize],
) -> Result<usize> {
    let w = windows[me];
    let candidates: Vec<usize> = windows
        .iter()
        .enumerate()
        .filter(|&(other, o)| {
            if other == me {
                return false;
            }
            let beyond = match side {
                Side::Left => o.ix_lo < w.ix_lo,
                Side::Right => o.ix_hi > w.ix_hi,
                Side::Bottom => o.iy_lo < w.iy_lo,
                Side::Top => o.iy_hi > w.iy_hi,
            };
            beyond
                && nodes.iter().all(|&n| {
                    let (i, j) = grid.node_ij(parent_of[n]);
                    o.contains_node(i, j)
                })
        })
        .map(|(other, _)| other)
        .collect();
    // On coarse grids a diagonal neighbor can also cover the whole edge once
    // its physical end nodes are dropped; the direct neighbor spans my full
    // window along the edge.
    let candidates = if candidates.len() > 1 {
        candidates
            .into_iter()
            .filter(|&other| {
                let o = windows[other];
                match side {
                    Side::Left | Side::Right => o.iy_lo <= w.iy_lo && o.iy_hi >= w.iy_hi,
                    Side::Bottom | Side::Top => o.ix_lo <= w.ix_lo && o.ix_hi >= w.ix_hi,
                }
            })
            .collect()
    } else {
        candidates
    };
    match candidates.as_slice() {
        [only] => Ok(*only),
        _ => Err(Error::Invariant(format!(
            "subdomain {} {} edge has {} complete-edge neighbors, expected exactly one",
            me + 1,
            side.name(),
            candidates.len()
        ))),
    }
}

/// Physical/Schwarz/interior split plus the Γ nodes grouped by local side.
fn partition_nodes(
    local: &StructuredGrid,
    parent_of: &[usize],
    parent: &StructuredGrid,
) -> (NodePartition, Vec<(Side, Vec<usize>)>) {
    let mut part = NodePartition::default();
    for n in 0..local.n_nodes() {
        if !local.is_boundary(n) {
            part.interior.push(n);
        } else if parent.is_boundary(parent_of[n]) {
            part.physical.push(n);
        }
    }
    let (nxl, nyl) = (local.nx, local.ny);
    let mut sides = Vec::new();
    for side in Side::ALL {
        let on_side: Vec<usize> = (0..local.n_nodes())
            .filter(|&n| {
                let (i, j) = local.node_ij(n);
                match side {
                    Side::Left => i == 0,
                    Side::Right => i == nxl,
                    Side::Bottom => j == 0,
                    Side::Top => j == nyl,
                }
            })
            .filter(|&n| !parent.is_boundary(parent_of[n]))
            .collect();
        if on_side.is_empty() {
            continue;
        }
        for &n in &on_side {
            if !part.schwarz.contains(&n) {
                part.schwarz.push(n);
            }
        }
        sides.push((side, on_side));
    }
    (part, sides)
}

/// Recomputes the interior / physical / Schwarz partition of a subdomain.
///
/// Local boundary nodes whose parent lies on the physical boundary are
/// physical; remaining local boundary nodes are Schwarz nodes.
pub fn classify_nodes(sub: &Subdomain, grid: &StructuredGrid) -> NodePartition {
    partition_nodes(&sub.local_grid, &sub.parent_of, grid).0
}
