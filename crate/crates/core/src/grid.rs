//! Geometric partition of the truncated volume domain `[1/n, n]`.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive_volume, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub left: f64,
    pub right: f64,
    /// Representative (pivot) volume: geometric mean of the edges.
    pub volume: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: f64,
    cells_per_decade: usize,
    cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n: f64,
    pub cells_per_decade: usize,
    pub cell_count: usize,
    pub edge_ratio: f64,
    pub edges: Vec<f64>,
}

impl Grid {
    /// `⌈2 log₁₀(n) · cells_per_decade⌉` cells with a constant edge ratio,
    /// spanning exactly `[1/n, n]`.
    pub fn geometric(n: f64, cells_per_decade: usize) -> Result<Self> {
        if !(n > 1.0 && n.is_finite()) {
            return Err(Error::Domain(format!(
                "truncation parameter n must exceed 1, got {n}"
            )));
        }
        if cells_per_decade == 0 {
            return Err(Error::Domain("cells_per_decade must be at least 1".into()));
        }
        let exact = 2.0 * n.log10() * cells_per_decade as f64;
        // guard against 16.000000000000004 rounding up to 17
        let count = ((exact - 1e-9).ceil() as usize).max(1);
        let lo = 1.0 / n;
        let log_span = 2.0 * n.ln();
        let mut edges: Vec<f64> = (0..=count)
            .map(|k| (lo.ln() + log_span * k as f64 / count as f64).exp())
            .collect();
        edges[0] = lo;
        edges[count] = n;
        let cells = edges
            .windows(2)
            .map(|w| Cell {
                left: w[0],
                right: w[1],
                volume: (w[0] * w[1]).sqrt(),
                width: w[1] - w[0],
            })
            .collect();
        Ok(Self {
            n,
            cells_per_decade,
            cells,
        })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn cells_per_decade(&self) -> usize {
        self.cells_per_decade
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn volumes(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.volume)
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().map(|c| c.width)
    }

    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.cells.iter().map(|c| c.left).collect();
        e.push(self.n);
        e
    }

    pub fn edge_ratio(&self) -> f64 {
        (self.n * self.n).powf(1.0 / self.len() as f64)
    }

    /// Index of the cell with `left ≤ μ < right`, or `None` outside `[1/n, n)`.
    pub fn locate(&self, mu: f64) -> Result<Option<usize>> {
        require_positive_volume("μ", mu)?;
        if mu < self.cells[0].left || mu >= self.n {
            return Ok(None);
        }
        let idx = self.cells.partition_point(|c| c.right <= mu);
        Ok(Some(idx.min(self.len() - 1)))
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            n: self.n,
            cells_per_decade: self.cells_per_decade,
            cell_count: self.len(),
            edge_ratio: self.edge_ratio(),
            edges: self.edges(),
        }
    }

    /// Where the aggregate of cells `i` and `j` is born.
    pub fn pair_target(&self, i: usize, j: usize) -> PairTarget {
        let sum = self.cells[i].volume + self.cells[j].volume;
        if sum >= self.n {
            return PairTarget::Excluded;
        }
        let last = self.len() - 1;
        let top = self.cells[last].volume;
        if sum >= top {
            return PairTarget::Overflow {
                cell: last,
                factor: sum / top,
            };
        }
        // largest l with x_l ≤ sum; sum ≥ 2 x_0 so l exists
        let l = self.cells.partition_point(|c| c.volume <= sum) - 1;
        PairTarget::Split {
            lower: l,
            weight: split_weight(self.cells[l].volume, self.cells[l + 1].volume, sum),
        }
    }

    pub fn pair_geometry(&self) -> PairMap {
        let m = self.len();
        let mut targets = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                targets.push(self.pair_target(i, j));
            }
        }
        PairMap { len: m, targets }
    }
}

/// Fraction of an aggregate of volume `sum ∈ [lo, hi)` assigned to pivot `lo`
/// so that number and mass are both preserved.
pub fn split_weight(lo: f64, hi: f64, sum: f64) -> f64 {
    (hi - sum) / (hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairTarget {
    /// Weight `weight` to cell `lower`, `1 − weight` to `lower + 1`.
    Split { lower: usize, weight: f64 },
    /// Sum lies between the last pivot and `n`: the aggregate is placed on
    /// the last pivot with `factor = sum / x_last` particles so mass is kept.
    Overflow { cell: usize, factor: f64 },
    /// `x_i + x_j ≥ n`: the truncated kernel vanishes.
    Excluded,
}

impl PairTarget {
    pub fn is_included(&self) -> bool {
        !matches!(self, PairTarget::Excluded)
    }
}

#[derive(Debug, Clone)]
pub struct PairMap {
    len: usize,
    targets: Vec<PairTarget>,
}

impl PairMap {
    pub fn get(&self, i: usize, j: usize) -> PairTarget {
        self.targets[i * self.len + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_decades_one_cell_each() {
        let g = Grid::geometric(10.0, 1).unwrap();
        assert_eq!(g.len(), 2);
        let e = g.edges();
        assert_eq!(e[0], 0.1);
        assert!((e[1] - 1.0).abs() < 1e-15);
        assert_eq!(e[2], 10.0);
    }

    #[test]
    fn cell_count_and_ratio() {
        let g = Grid::geometric(100.0, 4).unwrap();
        assert_eq!(g.len(), 16);
        let r = 10f64.powf(0.25);
        assert!((g.edge_ratio() - r).abs() < 1e-14);
        // product of consecutive edge ratios telescopes to n / (1/n)
        let e = g.edges();
        let prod: f64 = e.windows(2).map(|w| w[1] / w[0]).product();
        assert!((prod - 1e4).abs() < 1e-9);
        for w in e.windows(2) {
            assert!(((w[1] / w[0]) - r).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_domain() {
        assert!(Grid::geometric(1.0, 4).is_err());
        assert!(Grid::geometric(0.5, 4).is_err());
        assert!(Grid::geometric(10.0, 0).is_err());
    }

    #[test]
    fn locate_examples() {
        let g = Grid::geometric(10.0, 1).unwrap();
        assert_eq!(g.locate(0.5).unwrap(), Some(0));
        assert_eq!(g.locate(10.0).unwrap(), None);
        assert_eq!(g.locate(0.05).unwrap(), None);
        assert_eq!(g.locate(0.1).unwrap(), Some(0));
        assert_eq!(g.locate(g.cell(1).left).unwrap(), Some(1));
        assert!(g.locate(0.0).is_err());
        assert!(g.locate(-1.0).is_err());
    }

    #[test]
    fn partition_and_roundtrip() {
        for (n, cpd) in [(10.0, 1), (64.0, 8), (1000.0, 16), (256.0, 3)] {
            let g = Grid::geometric(n, cpd).unwrap();
            let total: f64 = g.widths().sum();
            assert!((total - (n - 1.0 / n)).abs() <= 1e-12 * n);
            for (i, c) in g.cells().iter().enumerate() {
                assert!(c.left < c.volume && c.volume < c.right);
                assert_eq!(g.locate(c.volume).unwrap(), Some(i));
                if i > 0 {
                    assert_eq!(c.left, g.cell(i - 1).right);
                    assert!(c.volume > g.cell(i - 1).volume);
                }
            }
        }
    }

    #[test]
    fn split_weight_examples() {
        assert_eq!(split_weight(1.0, 2.0, 1.0), 1.0);
        assert_eq!(split_weight(1.0, 3.0, 2.0), 0.5);
        assert_eq!(split_weight(2.0, 4.0, 3.0), 0.5);
    }

    #[test]
    fn pair_geometry_conserves_and_truncates() {
        for (n, cpd) in [(10.0, 1), (100.0, 4), (64.0, 8)] {
            let g = Grid::geometric(n, cpd).unwrap();
            let map = g.pair_geometry();
            for i in 0..g.len() {
                for j in 0..g.len() {
                    let sum = g.cell(i).volume + g.cell(j).volume;
                    match map.get(i, j) {
                        PairTarget::Split { lower, weight } => {
                            assert!((0.0..=1.0).contains(&weight));
                            let x0 = g.cell(lower).volume;
                            let x1 = g.cell(lower + 1).volume;
                            assert!(x0 <= sum && sum < x1);
                            let m = weight * x0 + (1.0 - weight) * x1;
                            assert!((m - sum).abs() <= 1e-12 * sum);
                        }
                        PairTarget::Overflow { cell, factor } => {
                            assert_eq!(cell, g.len() - 1);
                            assert!(sum < n);
                            assert!((factor * g.cell(cell).volume - sum).abs() <= 1e-12 * sum);
                        }
                        PairTarget::Excluded => assert!(sum >= n),
                    }
                    assert_eq!(map.get(i, j), map.get(j, i));
                }
            }
        }
    }

    #[test]
    fn excluded_when_sum_reaches_n() {
        let g = Grid::geometric(10.0, 1).unwrap();
        // x_1 = √10 ≈ 3.16, 2 x_1 ≈ 6.3 < 10: last-pivot overflow
        assert!(matches!(g.pair_target(1, 1), PairTarget::Overflow { .. }));
        let g = Grid::geometric(4.0, 1).unwrap();
        // cells [1/4, 1] and [1, 4], pivots 0.5 and 2: 2 + 2 = 4 ≥ n
        assert_eq!(g.pair_target(1, 1), PairTarget::Excluded);
    }
}
