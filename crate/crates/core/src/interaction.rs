//! Interaction prediction between two programmed surfaces.
//!
//! Surface `b` is laid over surface `a` displaced by `(dx, dy)` pixels, so
//! cell `a[i][j]` faces `b[i - dy][j - dx]`. The summed pixel products over
//! the overlap are divided by a normalizer: like polarities contribute `+1`
//! (repulsion) and opposite polarities `-1` (attraction).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::PixelGrid;

/// Force measured between two fully aligned, mutually complementary 8x8 sheets.
pub const CALIBRATION_FORCE_N: f64 = 1.09;
/// Pixel count of the calibration sheets.
pub const CALIBRATION_PIXELS: usize = 64;
/// Default band around zero that counts as agnostic.
pub const DEFAULT_EPSILON: f64 = 0.125;

/// Divisor applied to the raw pixel-product sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Number of overlapping pixels at that offset.
    #[default]
    Overlap,
    /// Pixel count of the larger grid, so partial overlaps fall off toward the edges.
    WholeGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    Attract,
    Repel,
    Agnostic,
}

#[derive(Debug, Clone, Copy)]
struct Overlap {
    rows: (usize, usize),
    cols: (usize, usize),
}

impl Overlap {
    fn count(&self) -> usize {
        (self.rows.1 - self.rows.0) * (self.cols.1 - self.cols.0)
    }
}

fn overlap_window(a: &PixelGrid, b: &PixelGrid, dx: i64, dy: i64) -> Option<Overlap> {
    let span = |len_a: usize, len_b: usize, shift: i64| {
        let lo = shift.max(0);
        let hi = (len_a as i64).min(len_b as i64 + shift);
        (lo < hi).then_some((lo as usize, hi as usize))
    };
    Some(Overlap {
        rows: span(a.rows(), b.rows(), dy)?,
        cols: span(a.cols(), b.cols(), dx)?,
    })
}

fn raw_sum(a: &PixelGrid, b: &PixelGrid, dx: i64, dy: i64, w: &Overlap) -> f64 {
    let mut sum = 0.0;
    for i in w.rows.0..w.rows.1 {
        let bi = (i as i64 - dy) as usize;
        let a_row = &a.row(i)[w.cols.0..w.cols.1];
        let b_lo = (w.cols.0 as i64 - dx) as usize;
        let b_row = &b.row(bi)[b_lo..b_lo + a_row.len()];
        sum += a_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
    }
    sum
}

fn divisor(a: &PixelGrid, b: &PixelGrid, overlap: usize, norm: Normalization) -> f64 {
    match norm {
        Normalization::Overlap => overlap as f64,
        Normalization::WholeGrid => a.len().max(b.len()) as f64,
    }
}

/// Overlap-normalized correlation of `b` displaced by `(dx, dy)` over `a`.
pub fn ncc_at(a: &PixelGrid, b: &PixelGrid, dx: i64, dy: i64) -> Result<f64> {
    ncc_at_with(a, b, dx, dy, Normalization::Overlap)
}

pub fn ncc_at_with(
    a: &PixelGrid,
    b: &PixelGrid,
    dx: i64,
    dy: i64,
    norm: Normalization,
) -> Result<f64> {
    let w = overlap_window(a, b, dx, dy).ok_or_else(|| {
        Error::OutOfRange(format!("offset ({dx}, {dy}) leaves no overlapping pixels"))
    })?;
    Ok(raw_sum(a, b, dx, dy, &w) / divisor(a, b, w.count(), norm))
}

/// Correlation values over every offset with at least one overlapping pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMap {
    dx_min: i64,
    dy_min: i64,
    width: usize,
    height: usize,
    normalization: Normalization,
    ncc: Vec<f64>,
    overlap: Vec<usize>,
}

impl InteractionMap {
    pub fn dx_range(&self) -> std::ops::RangeInclusive<i64> {
        self.dx_min..=self.dx_min + self.width as i64 - 1
    }

    pub fn dy_range(&self) -> std::ops::RangeInclusive<i64> {
        self.dy_min..=self.dy_min + self.height as i64 - 1
    }

    /// (columns, rows) of the map: one column per `dx`, one row per `dy`.
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn origin(&self) -> (i64, i64) {
        (self.dx_min, self.dy_min)
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    fn index(&self, dx: i64, dy: i64) -> Option<usize> {
        let x = dx - self.dx_min;
        let y = dy - self.dy_min;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Some(y as usize * self.width + x as usize)
    }

    pub fn get(&self, dx: i64, dy: i64) -> Option<f64> {
        self.index(dx, dy).map(|i| self.ncc[i])
    }

    pub fn overlap_at(&self, dx: i64, dy: i64) -> Option<usize> {
        self.index(dx, dy).map(|i| self.overlap[i])
    }

    /// `(dx, dy, ncc, overlap)` in row-major order (dy outer).
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64, usize)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width).map(move |x| {
                let i = y * self.width + x;
                (
                    self.dx_min + x as i64,
                    self.dy_min + y as i64,
                    self.ncc[i],
                    self.overlap[i],
                )
            })
        })
    }

    /// NCC values as rows indexed by `dy`.
    pub fn ncc_rows(&self) -> Vec<Vec<f64>> {
        self.ncc.chunks(self.width).map(<[f64]>::to_vec).collect()
    }

    pub fn overlap_rows(&self) -> Vec<Vec<usize>> {
        self.overlap
            .chunks(self.width)
            .map(<[usize]>::to_vec)
            .collect()
    }

    /// Rebuilds a map from its serialized parts.
    pub fn from_parts(
        origin: (i64, i64),
        normalization: Normalization,
        ncc: Vec<Vec<f64>>,
        overlap: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let height = ncc.len();
        let width = ncc.first().map(Vec::len).unwrap_or(0);
        if height == 0 || width == 0 {
            return Err(Error::Shape("interaction map is empty".into()));
        }
        if overlap.len() != height
            || ncc.iter().any(|r| r.len() != width)
            || overlap.iter().any(|r| r.len() != width)
        {
            return Err(Error::Shape("ragged interaction map".into()));
        }
        if let Some(v) = ncc.iter().flatten().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("ncc value {v} outside [-1, 1]")));
        }
        Ok(Self {
            dx_min: origin.0,
            dy_min: origin.1,
            width,
            height,
            normalization,
            ncc: ncc.into_iter().flatten().collect(),
            overlap: overlap.into_iter().flatten().collect(),
        })
    }
}

pub fn interaction_map(a: &PixelGrid, b: &PixelGrid) -> Result<InteractionMap> {
    interaction_map_with(a, b, Normalization::Overlap)
}

/// Sweeps `dx` over `[-(cols_b - 1), cols_a - 1]` and `dy` over `[-(rows_b - 1), rows_a - 1]`.
pub fn interaction_map_with(
    a: &PixelGrid,
    b: &PixelGrid,
    norm: Normalization,
) -> Result<InteractionMap> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain(
            "interaction map needs non-empty grids".into(),
        ));
    }
    let dx_min = -(b.cols() as i64 - 1);
    let dy_min = -(b.rows() as i64 - 1);
    let width = a.cols() + b.cols() - 1;
    let height = a.rows() + b.rows() - 1;
    let mut ncc = Vec::with_capacity(width * height);
    let mut overlap = Vec::with_capacity(width * height);
    for y in 0..height {
        let dy = dy_min + y as i64;
        for x in 0..width {
            let dx = dx_min + x as i64;
            let w = overlap_window(a, b, dx, dy).expect("offset inside sweep overlaps");
            let count = w.count();
            ncc.push(raw_sum(a, b, dx, dy, &w) / divisor(a, b, count, norm));
            overlap.push(count);
        }
    }
    Ok(InteractionMap {
        dx_min,
        dy_min,
        width,
        height,
        normalization: norm,
        ncc,
        overlap,
    })
}

pub fn classify(ncc: f64, epsilon: f64) -> Interaction {
    if ncc < -epsilon {
        Interaction::Attract
    } else if ncc > epsilon {
        Interaction::Repel
    } else {
        Interaction::Agnostic
    }
}

/// Signed force: negative attracts, positive repels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimate {
    pub newtons: f64,
    pub pixel_force: f64,
}

/// Linear per-pixel superposition at the calibration gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceModel {
    /// Newtons contributed by one fully aligned pixel pair.
    pub pixel_force: f64,
}

impl Default for ForceModel {
    fn default() -> Self {
        Self {
            pixel_force: CALIBRATION_FORCE_N / CALIBRATION_PIXELS as f64,
        }
    }
}

impl ForceModel {
    pub fn estimate(&self, ncc: f64, overlap_count: usize) -> Result<ForceEstimate> {
        if !ncc.is_finite() || !(-1.0..=1.0).contains(&ncc) {
            return Err(Error::Domain(format!("ncc {ncc} outside [-1, 1]")));
        }
        Ok(ForceEstimate {
            newtons: ncc * overlap_count as f64 * self.pixel_force,
            pixel_force: self.pixel_force,
        })
    }

    /// Force between `a` and `b` displaced by `(dx, dy)`.
    pub fn between(&self, a: &PixelGrid, b: &PixelGrid, dx: i64, dy: i64) -> Result<ForceEstimate> {
        let w = overlap_window(a, b, dx, dy).ok_or_else(|| {
            Error::OutOfRange(format!("offset ({dx}, {dy}) leaves no overlapping pixels"))
        })?;
        let count = w.count();
        self.estimate(raw_sum(a, b, dx, dy, &w) / count as f64, count)
    }
}

/// Force with the default calibration.
pub fn force_estimate(ncc: f64, overlap_count: usize) -> Result<ForceEstimate> {
    ForceModel::default().estimate(ncc, overlap_count)
}

/// Largest |ncc| over the map, optionally ignoring the aligned offset.
pub fn agnosticism_peak(a: &PixelGrid, b: &PixelGrid, exclude_aligned: bool) -> Result<f64> {
    agnosticism_peak_with(a, b, exclude_aligned, Normalization::Overlap)
}

pub fn agnosticism_peak_with(
    a: &PixelGrid,
    b: &PixelGrid,
    exclude_aligned: bool,
    norm: Normalization,
) -> Result<f64> {
    let map = interaction_map_with(a, b, norm)?;
    Ok(map
        .iter()
        .filter(|&(dx, dy, _, _)| !(exclude_aligned && dx == 0 && dy == 0))
        .map(|(_, _, v, _)| v.abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{checkerboard, complement, sylvester_hadamard};
    use proptest::prelude::*;

    /// Straight double loop over every cell of `a`, independent of the overlap window.
    fn brute_ncc(a: &PixelGrid, b: &PixelGrid, dx: i64, dy: i64) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..a.rows() as i64 {
            for j in 0..a.cols() as i64 {
                let (bi, bj) = (i - dy, j - dx);
                if bi >= 0 && bj >= 0 && bi < b.rows() as i64 && bj < b.cols() as i64 {
                    sum += a.get(i as usize, j as usize) * b.get(bi as usize, bj as usize);
                    count += 1;
                }
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    #[test]
    fn hadamard_complement_examples() {
        let h8 = sylvester_hadamard(8).unwrap();
        let c = complement(&h8);
        assert_eq!(ncc_at(&h8, &c, 0, 0).unwrap(), -1.0);
        assert_eq!(ncc_at(&h8, &c, 3, 0).unwrap(), 0.0);
    }

    #[test]
    fn checkerboard_shift_repels() {
        let cb = checkerboard(8, 8).unwrap();
        assert_eq!(ncc_at(&cb, &complement(&cb), 1, 0).unwrap(), 1.0);
        assert_eq!(brute_ncc(&cb, &complement(&cb), 1, 0).unwrap(), 1.0);
    }

    #[test]
    fn zero_overlap_is_out_of_range() {
        let h = sylvester_hadamard(4).unwrap();
        assert!(matches!(ncc_at(&h, &h, 4, 0), Err(Error::OutOfRange(_))));
        assert!(matches!(ncc_at(&h, &h, 0, -4), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn map_dimensions() {
        let h = sylvester_hadamard(8).unwrap();
        let m = interaction_map(&h, &complement(&h)).unwrap();
        assert_eq!(m.dims(), (15, 15));
        assert_eq!(m.dx_range(), -7..=7);

        let one = interaction_map(
            &PixelGrid::from_rows(&[[1.0]]).unwrap(),
            &PixelGrid::from_rows(&[[-1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(one.dims(), (1, 1));
        assert_eq!(one.get(0, 0), Some(-1.0));

        let a = PixelGrid::zeros(2, 5).unwrap();
        let b = PixelGrid::zeros(3, 4).unwrap();
        let m = interaction_map(&a, &b).unwrap();
        assert_eq!(m.dx_range(), -3..=4);
        assert_eq!(m.dy_range(), -2..=1);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(-1.0, DEFAULT_EPSILON), Interaction::Attract);
        assert_eq!(classify(0.0, DEFAULT_EPSILON), Interaction::Agnostic);
        assert_eq!(classify(0.33, DEFAULT_EPSILON), Interaction::Repel);
        assert_eq!(classify(0.125, DEFAULT_EPSILON), Interaction::Agnostic);
    }

    #[test]
    fn h4_mixed_offset_value() {
        let h4 = sylvester_hadamard(4).unwrap();
        let c = complement(&h4);
        let v = ncc_at(&h4, &c, 1, 1).unwrap();
        assert_eq!(v, brute_ncc(&h4, &c, 1, 1).unwrap());
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(classify(v, DEFAULT_EPSILON), Interaction::Repel);
    }

    #[test]
    fn force_examples() {
        let f = force_estimate(-1.0, 64).unwrap();
        assert!((f.newtons + 1.09).abs() < 1e-12);
        assert_eq!(force_estimate(0.0, 64).unwrap().newtons, 0.0);
        assert!((force_estimate(1.0, 64).unwrap().newtons - 1.09).abs() < 1e-12);
        assert!((f.pixel_force - 0.017_031_25).abs() < 1e-12);
        assert!(matches!(force_estimate(1.5, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn force_between_grids() {
        let h = sylvester_hadamard(8).unwrap();
        let f = ForceModel::default()
            .between(&h, &complement(&h), 0, 0)
            .unwrap();
        assert!((f.newtons + 1.09).abs() < 1e-12);
    }

    #[test]
    fn agnosticism_peak_examples() {
        let h8 = sylvester_hadamard(8).unwrap();
        let m = interaction_map(&h8, &complement(&h8)).unwrap();
        let axis_peak = m
            .iter()
            .filter(|&(dx, dy, _, _)| (dx == 0) != (dy == 0))
            .map(|(_, _, v, _)| v.abs())
            .fold(0.0, f64::max);
        assert_eq!(axis_peak, 0.0);

        for g in [h8.clone(), checkerboard(3, 5).unwrap()] {
            assert_eq!(agnosticism_peak(&g, &g, false).unwrap(), 1.0);
        }
    }

    #[test]
    fn whole_grid_normalization_falls_off() {
        let h = sylvester_hadamard(8).unwrap();
        let c = complement(&h);
        assert_eq!(
            ncc_at_with(&h, &c, 0, 0, Normalization::WholeGrid).unwrap(),
            -1.0
        );
        assert_eq!(
            ncc_at_with(&h, &c, 7, 7, Normalization::WholeGrid)
                .unwrap()
                .abs(),
            1.0 / 64.0
        );
        assert_eq!(ncc_at(&h, &c, 7, 7).unwrap().abs(), 1.0);
    }

    #[test]
    fn from_parts_round_trip() {
        let h = sylvester_hadamard(4).unwrap();
        let m = interaction_map(&h, &complement(&h)).unwrap();
        let back = InteractionMap::from_parts(
            m.origin(),
            m.normalization(),
            m.ncc_rows(),
            m.overlap_rows(),
        )
        .unwrap();
        assert_eq!(back, m);
    }

    fn ternary(rows: usize, cols: usize) -> impl Strategy<Value = PixelGrid> {
        prop::collection::vec(prop_oneof![Just(-1.0), Just(0.0), Just(1.0)], rows * cols)
            .prop_map(move |v| PixelGrid::new(rows, cols, v).unwrap())
    }

    fn arb_pair() -> impl Strategy<Value = (PixelGrid, PixelGrid)> {
        (1usize..7, 1usize..7, 1usize..7, 1usize..7)
            .prop_flat_map(|(ra, ca, rb, cb)| (ternary(ra, ca), ternary(rb, cb)))
    }

    proptest! {
        #[test]
        fn matches_brute_force((a, b) in arb_pair()) {
            let m = interaction_map(&a, &b).unwrap();
            for (dx, dy, v, n) in m.iter() {
                prop_assert!(n >= 1);
                prop_assert!((v - brute_ncc(&a, &b, dx, dy).unwrap()).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn swap_mirrors_offsets((a, b) in arb_pair()) {
            let ab = interaction_map(&a, &b).unwrap();
            let ba = interaction_map(&b, &a).unwrap();
            for (dx, dy, v, _) in ab.iter() {
                prop_assert_eq!(Some(v), ba.get(-dx, -dy));
            }
        }

        #[test]
        fn complement_flips_sign((a, b) in arb_pair()) {
            let m = interaction_map(&a, &b).unwrap();
            let mc = interaction_map(&a, &complement(&b)).unwrap();
            for (dx, dy, v, _) in m.iter() {
                prop_assert_eq!(mc.get(dx, dy).unwrap(), -v);
            }
        }

        #[test]
        fn unit_magnitude_only_for_uniform_products((a, b) in arb_pair()) {
            for (dx, dy, v, _) in interaction_map(&a, &b).unwrap().iter() {
                if v.abs() == 1.0 {
                    let window = overlap_window(&a, &b, dx, dy).unwrap();
                    for i in window.rows.0..window.rows.1 {
                        for j in window.cols.0..window.cols.1 {
                            let p = a.get(i, j) * b.get((i as i64 - dy) as usize, (j as i64 - dx) as usize);
                            prop_assert_eq!(p, v);
                        }
                    }
                }
            }
        }

        #[test]
        fn hadamard_axis_agnostic(k in 1u32..6, shift in 1i64..32, horizontal in any::<bool>()) {
            let n = 1usize << k;
            let shift = shift % n as i64;
            prop_assume!(shift != 0);
            let h = sylvester_hadamard(n).unwrap();
            let c = complement(&h);
            for s in [shift, -shift] {
                let (dx, dy) = if horizontal { (s, 0) } else { (0, s) };
                prop_assert_eq!(ncc_at(&h, &c, dx, dy).unwrap(), 0.0);
            }
        }
    }
}
