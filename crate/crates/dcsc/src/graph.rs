//! Row, column, and non-local patch graphs over an image, their
//! Laplacians, and the smoothness regularizers they induce on
//! coefficient maps.
//!
//! Edge weights follow exp(-d^2 / delta^2) where d = 1 - cosine
//! similarity of the node vectors, so similar nodes get weight near 1.
//! Line graphs connect nodes within a banded neighborhood |i - j| <= r;
//! the patch graph connects each tile to its k nearest neighbors by
//! cosine similarity. Graphs are built once from the noisy input image
//! and stay fixed across solver iterations.

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

/// Parameters for graph construction.
#[derive(Debug, Clone)]
pub struct GraphConfig {
    /// Shape factor of the weight kernel exp(-d^2 / delta^2).
    pub delta: f64,
    /// Banded neighborhood radius for line graphs: edges where 0 < |i-j| <= r.
    pub neighbor_radius: usize,
    /// Tile side for the non-local patch graph.
    pub patch_size: usize,
    /// Neighbors per vertex in the patch graph.
    pub knn: usize,
    /// Guard on vector norms in cosine similarity.
    pub epsilon_norm: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { delta: 1.0, neighbor_radius: 10, patch_size: 8, knn: 8, epsilon_norm: 1e-12 }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Parameter(format!("delta must be positive, got {}", self.delta)));
        }
        if self.neighbor_radius < 1 {
            return Err(Error::Parameter("neighbor_radius must be >= 1".into()));
        }
        if self.patch_size < 1 {
            return Err(Error::Parameter("patch_size must be >= 1".into()));
        }
        if self.knn < 1 {
            return Err(Error::Parameter("knn must be >= 1".into()));
        }
        if !(self.epsilon_norm > 0.0) {
            return Err(Error::Parameter("epsilon_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Undirected weighted graph stored as W, its degree vector, and
/// L = D - W. W is symmetric with zero diagonal and entries in [0, 1],
/// so L is positive semi-definite with zero row sums.
#[derive(Debug, Clone)]
pub struct GraphLaplacian {
    weights: Array2<f64>,
    degrees: Array1<f64>,
    laplacian: Array2<f64>,
}

impl GraphLaplacian {
    /// Builds D and L from a symmetric weight matrix.
    pub fn from_weights(weights: Array2<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 || weights.ncols() != n {
            return Err(Error::Dimension(format!(
                "weight matrix must be square and nonempty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        let degrees = weights.sum_axis(ndarray::Axis(1));
        let mut laplacian = -&weights;
        for i in 0..n {
            laplacian[[i, i]] += degrees[i];
        }
        Ok(GraphLaplacian { weights, degrees, laplacian })
    }

    pub fn size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn degrees(&self) -> &Array1<f64> {
        &self.degrees
    }

    pub fn laplacian(&self) -> &Array2<f64> {
        &self.laplacian
    }
}

/// Weight in (0, 1] between two node vectors: exp(-d^2/delta^2) with
/// d = 1 - cosine similarity; equals 1 iff the vectors are positively
/// parallel.
pub fn cosine_edge_weight(a: ArrayView1<f64>, b: ArrayView1<f64>, cfg: &GraphConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "edge weight vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Dimension("edge weight vectors must be nonempty".into()));
    }
    cfg.validate()?;
    Ok(weight_raw(a, b, cfg))
}

fn weight_raw(a: ArrayView1<f64>, b: ArrayView1<f64>, cfg: &GraphConfig) -> f64 {
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(cfg.epsilon_norm);
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(cfg.epsilon_norm);
    let sim = (dot / (na * nb)).clamp(-1.0, 1.0);
    let d = 1.0 - sim;
    (-d * d / (cfg.delta * cfg.delta)).exp()
}

/// Axis whose slices become graph nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineAxis {
    /// Nodes are the M rows (graph of size M).
    Rows,
    /// Nodes are the N columns (graph of size N).
    Columns,
}

/// Line graph over the rows or columns of an image with a banded
/// neighborhood.
pub fn build_line_graph(
    image: &ImageGrid,
    axis: LineAxis,
    cfg: &GraphConfig,
) -> Result<GraphLaplacian> {
    cfg.validate()?;
    let n = match axis {
        LineAxis::Rows => image.height(),
        LineAxis::Columns => image.width(),
    };
    if cfg.neighbor_radius >= n {
        return Err(Error::Parameter(format!(
            "neighbor_radius {} must be smaller than the node count {n}",
            cfg.neighbor_radius
        )));
    }
    let vector = |i: usize| -> ArrayView1<f64> {
        match axis {
            LineAxis::Rows => image.data().row(i),
            LineAxis::Columns => image.data().column(i),
        }
    };
    let mut weights = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n.min(i + cfg.neighbor_radius + 1) {
            let w = weight_raw(vector(i), vector(j), cfg);
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
    }
    GraphLaplacian::from_weights(weights)
}

/// Non-local patch graph plus the tiling that maps pixels to vertices.
///
/// Vertices are non-overlapping `patch_size` x `patch_size` tiles in
/// raster order (partial edge tiles zero-padded); each vertex connects to
/// its `knn` most cosine-similar other vertices and the weight matrix is
/// symmetrized by elementwise max.
#[derive(Debug, Clone)]
pub struct PatchGraph {
    laplacian: GraphLaplacian,
    patch_size: usize,
    tiles_down: usize,
    tiles_across: usize,
    height: usize,
    width: usize,
}

pub fn build_patch_graph(image: &ImageGrid, cfg: &GraphConfig) -> Result<PatchGraph> {
    cfg.validate()?;
    let (m, n) = (image.height(), image.width());
    let ps = cfg.patch_size;
    if ps > m.min(n) {
        return Err(Error::Parameter(format!(
            "patch_size {ps} exceeds image size {m}x{n}"
        )));
    }
    let tiles_down = m.div_ceil(ps);
    let tiles_across = n.div_ceil(ps);
    let t = tiles_down * tiles_across;
    if t < 2 {
        return Err(Error::Parameter("patch graph needs at least 2 tiles".into()));
    }

    // Tile vectors, zero-padded at the image boundary.
    let mut tiles = Array2::zeros((t, ps * ps));
    for ti in 0..tiles_down {
        for tj in 0..tiles_across {
            let tile = ti * tiles_across + tj;
            for i in 0..ps {
                for j in 0..ps {
                    let (r, c) = (ti * ps + i, tj * ps + j);
                    if r < m && c < n {
                        tiles[[tile, i * ps + j]] = image.data()[[r, c]];
                    }
                }
            }
        }
    }

    let knn = cfg.knn.min(t - 1);
    let mut weights = Array2::zeros((t, t));
    let rows: Vec<Vec<(usize, f64)>> = {
        use rayon::prelude::*;
        (0..t).into_par_iter()
            .map(|i| {
                let mut scored: Vec<(usize, f64)> = (0..t)
                    .filter(|&j| j != i)
                    .map(|j| (j, weight_raw(tiles.row(i), tiles.row(j), cfg)))
                    .collect();
                // strongest first; ties broken by index for determinism
                scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                scored.truncate(knn);
                scored
            })
            .collect()
    };
    for (i, selected) in rows.iter().enumerate() {
        for &(j, w) in selected {
            weights[[i, j]] = w;
        }
    }
    // symmetrize by elementwise max
    for i in 0..t {
        for j in i + 1..t {
            let w = weights[[i, j]].max(weights[[j, i]]);
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
    }
    Ok(PatchGraph {
        laplacian: GraphLaplacian::from_weights(weights)?,
        patch_size: ps,
        tiles_down,
        tiles_across,
        height: m,
        width: n,
    })
}

impl PatchGraph {
    pub fn laplacian(&self) -> &GraphLaplacian {
        &self.laplacian
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_down * self.tiles_across
    }

    /// Vertex index of the tile containing pixel (r, c).
    pub fn tile_of(&self, r: usize, c: usize) -> usize {
        (r / self.patch_size) * self.tiles_across + c / self.patch_size
    }

    pub fn matches(&self, height: usize, width: usize) -> bool {
        self.height == height && self.width == width
    }

    /// Gathers an image-sized map into a (tiles, patch_size^2) matrix,
    /// zero-padding partial tiles.
    fn gather(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let ps = self.patch_size;
        let mut g = Array2::zeros((self.tile_count(), ps * ps));
        for ti in 0..self.tiles_down {
            for tj in 0..self.tiles_across {
                let tile = ti * self.tiles_across + tj;
                for i in 0..ps {
                    for j in 0..ps {
                        let (r, c) = (ti * ps + i, tj * ps + j);
                        if r < self.height && c < self.width {
                            g[[tile, i * ps + j]] = x[[r, c]];
                        }
                    }
                }
            }
        }
        g
    }

    /// Applies the pixel-level Laplacian induced by tile membership:
    /// pixels at the same within-tile offset are coupled through the tile
    /// graph, so the apply is L * G per offset column.
    pub fn operator_apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let g = self.gather(x);
        let h = self.laplacian.laplacian().dot(&g);
        let ps = self.patch_size;
        let mut out = Array2::zeros((self.height, self.width));
        for ti in 0..self.tiles_down {
            for tj in 0..self.tiles_across {
                let tile = ti * self.tiles_across + tj;
                for i in 0..ps {
                    for j in 0..ps {
                        let (r, c) = (ti * ps + i, tj * ps + j);
                        if r < self.height && c < self.width {
                            out[[r, c]] = h[[tile, i * ps + j]];
                        }
                    }
                }
            }
        }
        out
    }

    /// Quadratic form <x, L_pix x> of the induced pixel-level Laplacian.
    pub fn value(&self, x: ArrayView2<f64>) -> f64 {
        let g = self.gather(x);
        let h = self.laplacian.laplacian().dot(&g);
        g.iter().zip(h.iter()).map(|(a, b)| a * b).sum()
    }

    /// Diagonal of the induced pixel-level operator.
    pub fn diagonal(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.height, self.width));
        for r in 0..self.height {
            for c in 0..self.width {
                let t = self.tile_of(r, c);
                out[[r, c]] = self.laplacian.laplacian()[[t, t]];
            }
        }
        out
    }
}

/// Side of the dual-graph quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphSide {
    /// tr(x L x') over columns of x.
    Column,
    /// tr(x' L x) over rows of x.
    Row,
}

/// Single-graph Laplacian regularizer value.
pub fn glr_value(x: ArrayView2<f64>, lap: &GraphLaplacian, side: GraphSide) -> Result<f64> {
    let expected = match side {
        GraphSide::Column => x.ncols(),
        GraphSide::Row => x.nrows(),
    };
    if lap.size() != expected {
        return Err(Error::Dimension(format!(
            "graph has {} nodes but map {:?} side has {expected}",
            lap.size(),
            side
        )));
    }
    let value = match side {
        GraphSide::Column => {
            let xl = x.dot(lap.laplacian());
            x.iter().zip(xl.iter()).map(|(a, b)| a * b).sum()
        }
        GraphSide::Row => {
            let lx = lap.laplacian().dot(&x);
            x.iter().zip(lx.iter()).map(|(a, b)| a * b).sum()
        }
    };
    Ok(value)
}

/// Column and row Laplacians with their trade-off weights.
#[derive(Debug, Clone)]
pub struct DualGraphPrior {
    pub column: GraphLaplacian,
    pub row: GraphLaplacian,
    pub alpha: f64,
    pub beta: f64,
}

impl DualGraphPrior {
    pub fn new(column: GraphLaplacian, row: GraphLaplacian, alpha: f64, beta: f64) -> Result<Self> {
        if alpha < 0.0 || beta < 0.0 {
            return Err(Error::Parameter(format!(
                "graph weights must be nonnegative, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(DualGraphPrior { column, row, alpha, beta })
    }

    pub fn dims_match(&self, height: usize, width: usize) -> bool {
        self.row.size() == height && self.column.size() == width
    }
}

/// Weighted dual-graph regularizer alpha tr(x Lc x') + beta tr(x' Lr x).
pub fn dglr_value(x: ArrayView2<f64>, prior: &DualGraphPrior) -> Result<f64> {
    if !prior.dims_match(x.nrows(), x.ncols()) {
        return Err(Error::Dimension(format!(
            "prior graphs are {}x{} but map is {}x{}",
            prior.row.size(),
            prior.column.size(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(prior.alpha * glr_value(x, &prior.column, GraphSide::Column)?
        + prior.beta * glr_value(x, &prior.row, GraphSide::Row)?)
}

/// Graph regularizer attached to a solve, if any.
#[derive(Debug, Clone)]
pub enum GraphPrior {
    /// Plain sparse coding, no graph term.
    None,
    /// Dual row/column line graphs.
    Dual(DualGraphPrior),
    /// Single non-local patch graph with weight mu.
    Patch { graph: PatchGraph, weight: f64 },
}

impl GraphPrior {
    /// True when the graph term contributes nothing to the objective.
    pub fn is_inert(&self) -> bool {
        match self {
            GraphPrior::None => true,
            GraphPrior::Dual(p) => p.alpha == 0.0 && p.beta == 0.0,
            GraphPrior::Patch { weight, .. } => *weight == 0.0,
        }
    }

    pub fn dims_match(&self, height: usize, width: usize) -> bool {
        match self {
            GraphPrior::None => true,
            GraphPrior::Dual(p) => p.dims_match(height, width),
            GraphPrior::Patch { graph, .. } => graph.matches(height, width),
        }
    }

    /// Applies the graph part of the regularizer's normal-equation
    /// operator: alpha x Lc + beta Lr x for the dual prior, mu L_pix x
    /// for the patch prior.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match self {
            GraphPrior::None => Array2::zeros(x.raw_dim()),
            GraphPrior::Dual(p) => {
                let mut out = Array2::zeros(x.raw_dim());
                if p.alpha != 0.0 {
                    out = x.dot(p.column.laplacian());
                    out.mapv_inplace(|v| v * p.alpha);
                }
                if p.beta != 0.0 {
                    let lx = p.row.laplacian().dot(&x);
                    Zip::from(&mut out).and(&lx).for_each(|o, &v| *o += p.beta * v);
                }
                out
            }
            GraphPrior::Patch { graph, weight } => {
                let mut out = graph.operator_apply(x);
                out.mapv_inplace(|v| v * weight);
                out
            }
        }
    }

    /// Regularizer value (without the 1/2 factor of the objective).
    pub fn value(&self, x: ArrayView2<f64>) -> Result<f64> {
        match self {
            GraphPrior::None => Ok(0.0),
            GraphPrior::Dual(p) => dglr_value(x, p),
            GraphPrior::Patch { graph, weight } => Ok(weight * graph.value(x)),
        }
    }

    /// Diagonal of the operator, used by the optional Jacobi preconditioner.
    pub fn diagonal(&self, height: usize, width: usize) -> Array2<f64> {
        match self {
            GraphPrior::None => Array2::zeros((height, width)),
            GraphPrior::Dual(p) => {
                let lc = p.column.laplacian();
                let lr = p.row.laplacian();
                Array2::from_shape_fn((height, width), |(i, j)| {
                    p.alpha * lc[[j, j]] + p.beta * lr[[i, i]]
                })
            }
            GraphPrior::Patch { graph, weight } => {
                let mut d = graph.diagonal();
                d.mapv_inplace(|v| v * weight);
                d
            }
        }
    }
}
