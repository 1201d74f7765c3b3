//! Generalized sparse regularization by reparameterization.
//!
//! A penalty on `V beta` with a full-row-rank `V` (r x p) becomes an ordinary sparse penalty on
//! the first `r` coordinates of `gamma = V~ beta`, where `V~ = [V; N']` appends an orthonormal basis
//! `N` of the null space of `V`. Because the rows of `N'` are orthonormal and orthogonal to those of
//! `V`,
//!
//! ```text
//!     V~^-1 = [ V' (V V')^-1 , N ]
//! ```
//!
//! and `V V'` is banded for difference matrices, so the back-transform needs only a banded
//! Cholesky factor. The null-space coordinates are left unpenalized.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::linalg::{self, BandedCholesky};
use crate::model::{GlmProblem, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenregError {
    #[error("regularization matrix for block {block} has rank {rank} but {rows} rows")]
    RankDeficient { block: usize, rank: usize, rows: usize },
    #[error("block {block} has {cols} columns but its regularization matrix has {expected}")]
    ShapeMismatch { block: usize, cols: usize, expected: usize },
    #[error("block {block} refers to column {col}, but the design has {p} columns")]
    ColumnOutOfRange { block: usize, col: usize, p: usize },
    #[error("column {col} belongs to more than one block")]
    OverlappingBlocks { col: usize },
    #[error("{0}")]
    InvalidSize(String),
    #[error("triplet line {line}: {msg}")]
    Triplet { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    Fused,
    PolyTrend(usize),
    CubicBinned,
    Custom,
}

impl RegKind {
    pub fn name(&self) -> String {
        match self {
            RegKind::Fused => "fused".into(),
            RegKind::PolyTrend(d) => format!("polytrend({d})"),
            RegKind::CubicBinned => "cubic_binned".into(),
            RegKind::Custom => "custom".into(),
        }
    }
}

/// A regularization matrix `V` (r x p).
#[derive(Debug, Clone, PartialEq)]
pub struct RegMatrix {
    pub v: DMatrix<f64>,
    pub kind: RegKind,
}

impl RegMatrix {
    pub fn rows(&self) -> usize {
        self.v.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.ncols()
    }

    /// Identity regularization: every coefficient penalized directly.
    pub fn identity(p: usize) -> Self {
        RegMatrix { v: DMatrix::identity(p, p), kind: RegKind::Custom }
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.v.nrows() {
            for j in 0..self.v.ncols() {
                if self.v[(i, j)] != 0.0 {
                    out.push((i, j, self.v[(i, j)]));
                }
            }
        }
        out
    }

    /// Parses a triplet file: header `i,j,v`, then one 0-based `row,col,value` per line.
    /// `cols` fixes the width; the height is one past the largest row index.
    pub fn from_triplets(text: &str, cols: usize) -> Result<Self, GenregError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.split(',').map(str::trim).eq(["i", "j", "v"]) => {}
            Some((n, _)) => return Err(GenregError::Triplet { line: n + 1, msg: "expected header i,j,v".into() }),
            None => return Err(GenregError::Triplet { line: 1, msg: "empty file".into() }),
        }
        let mut entries = Vec::new();
        for (n, line) in lines {
            let bad = |msg: String| GenregError::Triplet { line: n + 1, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            }
            let i: usize = fields[0].parse().map_err(|_| bad(format!("bad row index {:?}", fields[0])))?;
            let j: usize = fields[1].parse().map_err(|_| bad(format!("bad column index {:?}", fields[1])))?;
            let v: f64 = fields[2].parse().map_err(|_| bad(format!("bad value {:?}", fields[2])))?;
            if j >= cols {
                return Err(bad(format!("column {j} out of range for {cols} columns")));
            }
            if !v.is_finite() {
                return Err(bad("non-finite value".into()));
            }
            entries.push((i, j, v));
        }
        let rows = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        if rows == 0 {
            return Err(GenregError::Triplet { line: 2, msg: "no entries".into() });
        }
        let mut v = DMatrix::zeros(rows, cols);
        for (i, j, x) in entries {
            v[(i, j)] += x;
        }
        Ok(RegMatrix { v, kind: RegKind::Custom })
    }
}

fn first_difference(p: usize) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(p - 1, p);
    for i in 0..p - 1 {
        v[(i, i)] = -1.0;
        v[(i, i + 1)] = 1.0;
    }
    v
}

/// First-difference matrix ((p-1) x p) of the fused lasso.
pub fn build_fused(p: usize) -> Result<RegMatrix, GenregError> {
    if p < 2 {
        return Err(GenregError::InvalidSize(format!("fused regularization needs p >= 2, got {p}")));
    }
    Ok(RegMatrix { v: first_difference(p), kind: RegKind::Fused })
}

/// Order-`d` difference matrix `V_d = V_{d-1} V_1`, of shape (p-d) x p.
pub fn build_polytrend(p: usize, d: usize) -> Result<RegMatrix, GenregError> {
    if d == 0 || p <= d {
        return Err(GenregError::InvalidSize(format!("polynomial trend needs 1 <= d < p, got d = {d}, p = {p}")));
    }
    let mut v = first_difference(p);
    for k in 2..=d {
        // V_{k-1} is (p-k+1) x p; left-multiplying by a (p-k) x (p-k+1) first difference gives V_k
        v = first_difference(p - k + 1) * v;
    }
    Ok(RegMatrix { v, kind: if d == 1 { RegKind::Fused } else { RegKind::PolyTrend(d) } })
}

/// Binned cubic trend filter: second differences at both ends, fourth differences inside.
pub fn build_cubic_binned(bins: usize) -> Result<RegMatrix, GenregError> {
    if bins < 6 {
        return Err(GenregError::InvalidSize(format!("cubic binned regularization needs at least 6 bins, got {bins}")));
    }
    let mut v = DMatrix::zeros(bins - 2, bins);
    for (k, c) in [-1.0, 2.0, -1.0].into_iter().enumerate() {
        v[(0, k)] = c;
        v[(bins - 3, bins - 3 + k)] = c;
    }
    for r in 0..bins - 4 {
        for (k, c) in [1.0, -4.0, 6.0, -4.0, 1.0].into_iter().enumerate() {
            v[(r + 1, r + k)] = c;
        }
    }
    Ok(RegMatrix { v, kind: RegKind::CubicBinned })
}

/// A regularization matrix applied to a block of design columns.
#[derive(Debug, Clone)]
pub struct RegBlock {
    pub reg: RegMatrix,
    pub cols: Vec<usize>,
}

#[derive(Debug, Clone)]
struct BlockTransform {
    cols: Vec<usize>,
    v: DMatrix<f64>,
    null: DMatrix<f64>,
    vvt: BandedCholesky,
    /// Offsets of the block's penalized and null coordinates in `gamma`.
    pen_at: usize,
    null_at: usize,
}

impl BlockTransform {
    /// `V~^-1` applied to the block's slice of `gamma`.
    fn inverse(&self, gamma_v: &DVector<f64>, gamma_n: &DVector<f64>) -> DVector<f64> {
        let z = self.vvt.solve(gamma_v);
        self.v.transpose() * z + &self.null * gamma_n
    }
}

/// The map between `beta` and `gamma` coordinates.
///
/// `gamma` lists the penalized coordinates `V_b beta_b` of every block, then the null-space
/// coordinates of every block, then the columns outside all blocks in their original order.
#[derive(Debug, Clone)]
pub struct Reparameterization {
    p: usize,
    r: usize,
    blocks: Vec<BlockTransform>,
    /// `(gamma index, beta index)` of the columns outside all blocks.
    free: Vec<(usize, usize)>,
}

impl Reparameterization {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of penalized `gamma` coordinates coming from regularization matrices.
    pub fn penalized_rows(&self) -> usize {
        self.r
    }

    /// `gamma = V~ beta`.
    pub fn forward(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut gamma = DVector::zeros(self.p);
        for b in &self.blocks {
            let bb = DVector::from_iterator(b.cols.len(), b.cols.iter().map(|&j| beta[j]));
            gamma.rows_mut(b.pen_at, b.v.nrows()).copy_from(&(&b.v * &bb));
            gamma.rows_mut(b.null_at, b.null.ncols()).copy_from(&(b.null.transpose() * &bb));
        }
        for &(g, j) in &self.free {
            gamma[g] = beta[j];
        }
        gamma
    }

    /// `beta = V~^-1 gamma`.
    pub fn back_transform(&self, gamma: &DVector<f64>) -> DVector<f64> {
        let mut beta = DVector::zeros(self.p);
        for b in &self.blocks {
            let gv = gamma.rows(b.pen_at, b.v.nrows()).into_owned();
            let gn = gamma.rows(b.null_at, b.null.ncols()).into_owned();
            let bb = b.inverse(&gv, &gn);
            for (k, &j) in b.cols.iter().enumerate() {
                beta[j] = bb[k];
            }
        }
        for &(g, j) in &self.free {
            beta[j] = gamma[g];
        }
        beta
    }

    /// `V_b beta_b` for every block.
    pub fn block_penalized(&self, beta: &DVector<f64>) -> Vec<DVector<f64>> {
        self.blocks
            .iter()
            .map(|b| &b.v * DVector::from_iterator(b.cols.len(), b.cols.iter().map(|&j| beta[j])))
            .collect()
    }

    /// Original column of each `gamma` coordinate outside all blocks.
    pub fn free_columns(&self) -> Vec<(usize, usize)> {
        self.free.clone()
    }
}

/// Orthonormal basis of the null space of `v`, from the eigenvectors of `V'V`.
fn null_space(v: &DMatrix<f64>, block: usize) -> Result<DMatrix<f64>, GenregError> {
    let (r, p) = v.shape();
    let eig = SymmetricEigen::new(v.transpose() * v);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let tol = max * p as f64 * f64::EPSILON * 100.0;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let rank = eig.eigenvalues.iter().filter(|&&e| e > tol).count();
    if rank != r {
        return Err(GenregError::RankDeficient { block, rank, rows: r });
    }
    let mut null = DMatrix::zeros(p, p - r);
    for (k, &i) in order.iter().take(p - r).enumerate() {
        null.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok(null)
}

/// Rewrites `prob` in `gamma` coordinates. Penalized coordinates are the regularization rows of
/// every block; null-space coordinates are unpenalized; columns outside all blocks keep their
/// original penalization.
pub fn reparameterize(prob: &GlmProblem, blocks: &[RegBlock]) -> Result<(GlmProblem, Reparameterization), GenregError> {
    let p = prob.p();
    let mut owner = vec![None; p];
    for (b, blk) in blocks.iter().enumerate() {
        if blk.cols.len() != blk.reg.cols() {
            return Err(GenregError::ShapeMismatch { block: b, cols: blk.cols.len(), expected: blk.reg.cols() });
        }
        for &j in &blk.cols {
            if j >= p {
                return Err(GenregError::ColumnOutOfRange { block: b, col: j, p });
            }
            if owner[j].is_some() {
                return Err(GenregError::OverlappingBlocks { col: j });
            }
            owner[j] = Some(b);
        }
    }
    let r: usize = blocks.iter().map(|b| b.reg.rows()).sum();
    let nulls: usize = blocks.iter().map(|b| b.reg.cols() - b.reg.rows().min(b.reg.cols())).sum();
    let mut transforms = Vec::with_capacity(blocks.len());
    let (mut pen_at, mut null_at) = (0, r);
    for (b, blk) in blocks.iter().enumerate() {
        let v = blk.reg.v.clone();
        if v.nrows() > v.ncols() {
            return Err(GenregError::RankDeficient { block: b, rank: linalg::numerical_rank(&v), rows: v.nrows() });
        }
        let null = null_space(&v, b)?;
        let vvt = v.clone() * v.transpose();
        let vvt = BandedCholesky::new(&vvt, linalg::bandwidth(&vvt))
            .ok_or(GenregError::RankDeficient { block: b, rank: linalg::numerical_rank(&v), rows: v.nrows() })?;
        let t = BlockTransform { cols: blk.cols.clone(), v, null, vvt, pen_at, null_at };
        pen_at += t.v.nrows();
        null_at += t.null.ncols();
        transforms.push(t);
    }
    let mut free = Vec::new();
    let mut g = r + nulls;
    for (j, o) in owner.iter().enumerate() {
        if o.is_none() {
            free.push((g, j));
            g += 1;
        }
    }
    let rep = Reparameterization { p, r, blocks: transforms, free };

    // Z = X V~^-1, assembled block by block
    let x = prob.design();
    let n = prob.n();
    let mut z = DMatrix::zeros(n, p);
    let mut penalized = vec![false; p];
    for b in &rep.blocks {
        let xb = DMatrix::from_fn(n, b.cols.len(), |i, k| x[(i, b.cols[k])]);
        let xvt = &xb * b.v.transpose();
        for i in 0..n {
            let row = b.vvt.solve(&xvt.row(i).transpose());
            for k in 0..b.v.nrows() {
                z[(i, b.pen_at + k)] = row[k];
            }
        }
        z.columns_mut(b.null_at, b.null.ncols()).copy_from(&(&xb * &b.null));
        for k in 0..b.v.nrows() {
            penalized[b.pen_at + k] = true;
        }
    }
    for &(g, j) in &rep.free {
        z.set_column(g, &x.column(j));
        penalized[g] = prob.is_penalized(j);
    }
    let transformed = GlmProblem::new(z, prob.response().clone(), prob.loss(), penalized)?;
    Ok((transformed, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Loss;
    use crate::path::{follow_path, PathOptions};
    use crate::penalty::PenaltySpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    fn random_problem(n: usize, p: usize, seed: u64, loss: Loss) -> GlmProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| match loss {
            Loss::Gaussian => x[(i, 0)] + rng.sample::<f64, _>(StandardNormal),
            _ => f64::from(rng.random::<f64>() < 0.4),
        });
        GlmProblem::all_penalized(x, y, loss).unwrap()
    }

    #[test]
    fn fused_matrices() {
        assert_eq!(rows_of(&build_fused(3).unwrap().v), vec![vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0]]);
        assert_eq!(rows_of(&build_fused(2).unwrap().v), vec![vec![-1.0, 1.0]]);
        for p in [2, 5, 17] {
            assert_eq!(linalg::numerical_rank(&build_fused(p).unwrap().v), p - 1);
        }
        assert!(build_fused(1).is_err());
    }

    #[test]
    fn second_order_trend() {
        let v = build_polytrend(4, 2).unwrap();
        assert_eq!(rows_of(&v.v), vec![vec![1.0, -2.0, 1.0, 0.0], vec![0.0, 1.0, -2.0, 1.0]]);
        assert_eq!(v.kind, RegKind::PolyTrend(2));
        assert_eq!(build_polytrend(6, 1).unwrap(), build_fused(6).unwrap());
        assert!(build_polytrend(3, 3).is_err());
    }

    #[test]
    fn cubic_binned_layout() {
        let v = build_cubic_binned(10).unwrap().v;
        assert_eq!(v.shape(), (8, 10));
        let mut expect = vec![vec![0.0; 10]; 8];
        expect[0][..3].copy_from_slice(&[-1.0, 2.0, -1.0]);
        for r in 0..6 {
            expect[r + 1][r..r + 5].copy_from_slice(&[1.0, -4.0, 6.0, -4.0, 1.0]);
        }
        expect[7][7..].copy_from_slice(&[-1.0, 2.0, -1.0]);
        assert_eq!(rows_of(&v), expect);

        let cubic = DVector::from_fn(10, |k, _| (k as f64).powi(3));
        let out = &v * cubic;
        assert!(out.rows(1, 6).amax() < 1e-12);
        assert!(out[0] != 0.0 && out[7] != 0.0);
        let linear = DVector::from_fn(10, |k, _| 2.0 - 0.5 * k as f64);
        assert!((&v * linear).amax() < 1e-12);
        assert_eq!(linalg::numerical_rank(&v), 8);
    }

    #[test]
    fn identity_regularization_is_identity_transform() {
        let prob = random_problem(12, 4, 1, Loss::Gaussian);
        let blocks = [RegBlock { reg: RegMatrix::identity(4), cols: (0..4).collect() }];
        let (t, rep) = reparameterize(&prob, &blocks).unwrap();
        let beta = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert!((rep.forward(&beta) - &beta).amax() < 1e-14);
        assert!((t.design() - prob.design()).amax() < 1e-13);
        assert_eq!(t.penalized_indices(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn fused_constants_are_free() {
        let prob = random_problem(8, 3, 2, Loss::Gaussian);
        let blocks = [RegBlock { reg: build_fused(3).unwrap(), cols: vec![0, 1, 2] }];
        let (t, rep) = reparameterize(&prob, &blocks).unwrap();
        let gamma = rep.forward(&DVector::from_element(3, 1.0));
        assert!(gamma.rows(0, 2).amax() < 1e-15);
        assert_eq!(t.penalized_indices(), vec![0, 1]);
        assert_eq!(t.unpenalized_indices(), vec![2]);
    }

    #[test]
    fn back_transform_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prob = random_problem(5, 50, 3, Loss::Gaussian);
        let blocks = [RegBlock { reg: build_fused(50).unwrap(), cols: (0..50).collect() }];
        let (_, rep) = reparameterize(&prob, &blocks).unwrap();
        let gamma = DVector::from_fn(50, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = rep.back_transform(&gamma);
        assert!((rep.forward(&beta) - &gamma).amax() <= 1e-10);
        assert_eq!(rep.back_transform(&DVector::zeros(50)), DVector::zeros(50));
        let beta0 = DVector::from_fn(50, |j, _| (j as f64 * 0.3).sin());
        assert!((rep.back_transform(&rep.forward(&beta0)) - beta0).amax() <= 1e-10);
    }

    #[test]
    fn blocks_and_free_columns() {
        // intercept, a fused block of 4 and a cubic block of 6
        let prob = random_problem(30, 11, 4, Loss::Gaussian);
        let blocks = [
            RegBlock { reg: build_fused(4).unwrap(), cols: vec![1, 2, 3, 4] },
            RegBlock { reg: build_cubic_binned(6).unwrap(), cols: (5..11).collect() },
        ];
        let (t, rep) = reparameterize(&prob, &blocks).unwrap();
        assert_eq!(rep.penalized_rows(), 3 + 4);
        assert_eq!(t.penalized_indices(), vec![0, 1, 2, 3, 4, 5, 6, 10]);
        let beta = DVector::from_fn(11, |j, _| 1.0 + j as f64 * 0.7 - (j as f64).powi(2) * 0.1);
        let gamma = rep.forward(&beta);
        assert!((rep.back_transform(&gamma) - &beta).amax() < 1e-10);
        assert!((t.design() * &gamma - prob.design() * &beta).amax() < 1e-10);
    }

    #[test]
    fn dependent_rows_are_rejected() {
        let prob = random_problem(10, 4, 5, Loss::Gaussian);
        let v = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 0.0, 0.0, 2.0, -2.0, 0.0, 0.0]);
        let blocks = [RegBlock { reg: RegMatrix { v, kind: RegKind::Custom }, cols: (0..4).collect() }];
        assert!(matches!(reparameterize(&prob, &blocks), Err(GenregError::RankDeficient { rank: 1, rows: 2, .. })));
        let blocks = [
            RegBlock { reg: build_fused(2).unwrap(), cols: vec![0, 1] },
            RegBlock { reg: build_fused(2).unwrap(), cols: vec![1, 2] },
        ];
        assert_eq!(reparameterize(&prob, &blocks).unwrap_err(), GenregError::OverlappingBlocks { col: 1 });
    }

    #[test]
    fn triplet_parsing() {
        let m = RegMatrix::from_triplets("i,j,v\n0,0,-1\n0,1,1\n1,1,-1\n1,2,1\n", 3).unwrap();
        assert_eq!(m.v, build_fused(3).unwrap().v);
        assert_eq!(m.triplets().len(), 4);
        assert!(matches!(RegMatrix::from_triplets("i,j,v\n0,3,1\n", 3), Err(GenregError::Triplet { line: 2, .. })));
        assert!(matches!(RegMatrix::from_triplets("a,b,c\n", 3), Err(GenregError::Triplet { line: 1, .. })));
        assert!(matches!(RegMatrix::from_triplets("i,j,v\n0,x,1\n", 3), Err(GenregError::Triplet { line: 2, .. })));
    }

    #[test]
    fn heavy_fusion_gives_pooled_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = DMatrix::from_fn(40, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(40, |i, _| x.row(i).sum() * 0.8 + 0.3 * rng.sample::<f64, _>(StandardNormal));
        let prob = GlmProblem::all_penalized(x.clone(), y.clone(), Loss::Gaussian).unwrap();
        let blocks = [RegBlock { reg: build_fused(5).unwrap(), cols: (0..5).collect() }];
        let (t, rep) = reparameterize(&prob, &blocks).unwrap();
        let path = follow_path(&t, &PenaltySpec::power(1.0).unwrap(), &PathOptions::default()).unwrap();
        let beta = rep.back_transform(&path.samples[0].beta(5));
        // all coefficients equal c, with c the least-squares fit on the row sums
        let s = DVector::from_fn(40, |i, _| x.row(i).sum());
        let c = s.dot(&y) / s.dot(&s);
        assert!((beta.add_scalar(-c)).amax() < 1e-8, "{beta} vs {c}");
        assert!(rep.block_penalized(&beta)[0].amax() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trend_annihilates_low_degree(p in 3usize..25, d in 1usize..5, seed in 0u64..1000) {
            prop_assume!(d < p);
            let v = build_polytrend(p, d).unwrap().v;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let coef: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let poly = DVector::from_fn(p, |k, _| {
                let t = k as f64 / p as f64;
                coef.iter().rev().fold(0.0, |acc, c| acc * t + c)
            });
            prop_assert!((&v * poly).amax() <= 1e-12);
            prop_assert_eq!(v.shape(), (p - d, p));
        }

        #[test]
        fn transformed_loss_matches(seed in 0u64..500, bins in 6usize..12, logistic in any::<bool>()) {
            let loss = if logistic { Loss::Logistic } else { Loss::Gaussian };
            let prob = random_problem(20, bins + 1, seed, loss);
            let blocks = [RegBlock { reg: build_cubic_binned(bins).unwrap(), cols: (1..=bins).collect() }];
            let (t, rep) = reparameterize(&prob, &blocks).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
            let gamma = DVector::from_fn(bins + 1, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.3);
            let a = t.loss_value(&gamma).unwrap();
            let b = prob.loss_value(&rep.back_transform(&gamma)).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }

        #[test]
        fn full_regularization_zeroes_differences(seed in 0u64..200) {
            let prob = random_problem(40, 8, seed, Loss::Gaussian);
            let blocks = [RegBlock { reg: build_polytrend(8, 2).unwrap(), cols: (0..8).collect() }];
            let (t, rep) = reparameterize(&prob, &blocks).unwrap();
            let path = follow_path(&t, &PenaltySpec::power(0.5).unwrap(), &PathOptions::default()).unwrap();
            let beta = rep.back_transform(&path.samples[0].beta(8));
            prop_assert!(rep.block_penalized(&beta)[0].amax() <= 1e-8);
        }
    }
}
