//! Electromagnet and sheet magnetization models.
//!
//! Applied fields are expressed as coil current in amperes throughout; the
//! coil geometry constants that convert current to H cancel in every result
//! this crate produces.
//!
//! The sheet stores one remanent magnetization per pixel. A pulse overwrites
//! it with `sign(I) * reach(|I|)`, where `reach` is the fraction of
//! saturation a pulse of that magnitude achieves from any prior state.
//!
//! Hysteresis loops for symmetric current cycles come from a population of
//! rectangular switching elements whose up/down thresholds are independently
//! distributed with cumulative share `sqrt(reach(I))`. That choice makes the
//! loop tips lie on `reach`, keeps the full remanence after release, and
//! nests smaller loops strictly inside larger ones.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overcurrent guard for the electromagnet, as a multiple of `i_sat`.
pub const MAX_COIL_OVERDRIVE: f64 = 1.5;

/// Currents within this distance of the coercive current count as a coercive pulse.
/// Matches the 0.01 A resolution of the device protocol.
pub const COERCIVE_TOLERANCE_A: f64 = 0.005;

/// Anhysteretic B-H response of the write head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectromagnetModel {
    /// Flux density at the tip in saturation, tesla.
    pub b_sat_tip: f64,
    /// Current at which the head is effectively saturated, amperes.
    pub i_sat: f64,
    /// Steepness of the saturating curve.
    pub shape: f64,
    pub turns: u32,
    pub core_mu_r: f64,
    /// Repeatability noise of a field measurement, tesla.
    pub noise_sigma: f64,
}

impl Default for ElectromagnetModel {
    fn default() -> Self {
        Self {
            b_sat_tip: 0.302,
            i_sat: 10.0,
            shape: 3.0,
            turns: 250,
            core_mu_r: 90_000.0,
            noise_sigma: 1.01e-3,
        }
    }
}

impl ElectromagnetModel {
    /// Field at the tip for coil current `i`.
    pub fn field(&self, i: f64) -> Result<f64> {
        let limit = MAX_COIL_OVERDRIVE * self.i_sat;
        if !i.is_finite() || i.abs() > limit {
            return Err(Error::OutOfRange(format!(
                "coil current {i} A exceeds the {limit} A model limit"
            )));
        }
        Ok(self.b_sat_tip * (self.shape * i / self.i_sat).tanh())
    }

    /// A noisy field reading as a gaussmeter would record it.
    pub fn measure<R: Rng + ?Sized>(&self, i: f64, rng: &mut R) -> Result<f64> {
        let b = self.field(i)?;
        if self.noise_sigma == 0.0 {
            return Ok(b);
        }
        let noise = Normal::new(0.0, self.noise_sigma)
            .map_err(|e| Error::Config(format!("noise sigma: {e}")))?;
        Ok(b + noise.sample(rng))
    }
}

/// Convenience wrapper over [`ElectromagnetModel::field`].
pub fn emag_field(model: &ElectromagnetModel, i: f64) -> Result<f64> {
    model.field(i)
}

/// Hysteretic soft magnetic sheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetModel {
    /// Remanent flux of a saturated pixel, tesla.
    pub b_sat: f64,
    /// Smallest pulse current that saturates a pixel, amperes.
    pub i_program_full: f64,
    /// Steepness of the tanh-shaped `reach` profile.
    pub reach_steepness: f64,
}

impl Default for SheetModel {
    fn default() -> Self {
        Self {
            b_sat: 0.0344,
            i_program_full: 10.0,
            reach_steepness: 1.75,
        }
    }
}

impl SheetModel {
    /// Fraction of saturation left behind by a pulse of magnitude `current`.
    ///
    /// Strictly increasing on `[0, i_program_full]`, 0 at 0 A and 1 at full current.
    pub fn reach(&self, current: f64) -> f64 {
        let x = current.abs().min(self.i_program_full) / self.i_program_full;
        (self.reach_steepness * x).tanh() / self.reach_steepness.tanh()
    }

    /// Reverse current that brings a saturated pixel back to zero.
    ///
    /// Derived from the loop model: half the switching elements must flip,
    /// so `reach(i_coercive) = 1/4`.
    pub fn i_coercive(&self) -> f64 {
        invert_reach(self, 0.25)
    }

    fn check_current(&self, current: f64) -> Result<()> {
        if !current.is_finite() || current.abs() > self.i_program_full + 1e-9 {
            return Err(Error::OutOfRange(format!(
                "pulse current {current} A exceeds {} A",
                self.i_program_full
            )));
        }
        Ok(())
    }

    /// Cumulative share of switching thresholds below `current`.
    fn threshold_share(&self, current: f64) -> f64 {
        self.reach(current).sqrt()
    }

    /// Normalized magnetization on the descending branch of the symmetric
    /// loop with turning current `i_peak`, evaluated at `current`.
    pub fn descending(&self, i_peak: f64, current: f64) -> f64 {
        let peak_share = self.threshold_share(i_peak);
        let tip = peak_share * peak_share;
        if current >= 0.0 {
            tip
        } else {
            tip - 2.0 * peak_share * self.threshold_share(current.abs().min(i_peak))
        }
    }

    /// Ascending branch; the loop is point-symmetric about the origin.
    pub fn ascending(&self, i_peak: f64, current: f64) -> f64 {
        -self.descending(i_peak, -current)
    }
}

/// Normalized remanent magnetization of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PixelState(f64);

impl PixelState {
    pub const DEMAGNETIZED: PixelState = PixelState(0.0);
    pub const NORTH: PixelState = PixelState(1.0);
    pub const SOUTH: PixelState = PixelState(-1.0);

    pub fn new(m: f64) -> Result<Self> {
        if !m.is_finite() || !(-1.0..=1.0).contains(&m) {
            return Err(Error::Domain(format!("magnetization {m} outside [-1, 1]")));
        }
        Ok(Self(m))
    }

    pub fn m(self) -> f64 {
        self.0
    }

    /// Physical remanent flux in tesla.
    pub fn flux(self, sheet: &SheetModel) -> f64 {
        self.0 * sheet.b_sat
    }
}

/// Applies one current pulse to a pixel.
///
/// The new state depends only on the pulse, except that a pulse of the
/// coercive magnitude against a saturated pixel leaves it demagnetized.
/// A zero-current pulse changes nothing.
pub fn program_pixel(
    sheet: &SheetModel,
    state: PixelState,
    pulse_current: f64,
) -> Result<PixelState> {
    sheet.check_current(pulse_current)?;
    if pulse_current == 0.0 {
        return Ok(state);
    }
    let saturated_against = state.m().abs() == 1.0 && state.m().signum() != pulse_current.signum();
    if saturated_against && (pulse_current.abs() - sheet.i_coercive()).abs() <= COERCIVE_TOLERANCE_A
    {
        return Ok(PixelState::DEMAGNETIZED);
    }
    PixelState::new(pulse_current.signum() * sheet.reach(pulse_current))
}

fn invert_reach(sheet: &SheetModel, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, sheet.i_program_full);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sheet.reach(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Signed pulse current that leaves a pixel at `target_m`.
pub fn current_for_target(sheet: &SheetModel, target_m: f64) -> Result<f64> {
    if !target_m.is_finite() || target_m.abs() > 1.0 {
        return Err(Error::Domain(format!(
            "target magnetization {target_m} outside [-1, 1]"
        )));
    }
    if target_m == 0.0 {
        return Ok(0.0);
    }
    if target_m.abs() == 1.0 {
        return Ok(target_m * sheet.i_program_full);
    }
    Ok(target_m.signum() * invert_reach(sheet, target_m.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// From the demagnetized state up to the first peak.
    Initial,
    Descending,
    Ascending,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Initial => "initial",
            Branch::Descending => "descending",
            Branch::Ascending => "ascending",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopPoint {
    pub current_amps: f64,
    pub flux_tesla: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisLoop {
    pub i_max: f64,
    pub points: Vec<LoopPoint>,
}

impl HysteresisLoop {
    pub fn branch(&self, branch: Branch) -> impl Iterator<Item = &LoopPoint> {
        self.points.iter().filter(move |p| p.branch == branch)
    }

    /// Shoelace area of the closed descending + ascending cycle in (A, T).
    /// Positive for anti-clockwise traversal.
    pub fn signed_area(&self) -> f64 {
        let cycle: Vec<&LoopPoint> = self
            .points
            .iter()
            .filter(|p| p.branch != Branch::Initial)
            .collect();
        let n = cycle.len();
        (0..n)
            .map(|k| {
                let (p, q) = (cycle[k], cycle[(k + 1) % n]);
                p.current_amps * q.flux_tesla - q.current_amps * p.flux_tesla
            })
            .sum::<f64>()
            / 2.0
    }

    /// CSV with columns `current_amps,flux_tesla,branch_label`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["current_amps", "flux_tesla", "branch_label"])?;
        for p in &self.points {
            w.write_record([
                format!("{:.4}", p.current_amps),
                format!("{:.6}", p.flux_tesla),
                p.branch.label().to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Traces a symmetric loop: demagnetized → `+i_max`, down to `-i_max`, back up to `+i_max`.
///
/// The initial branch has `steps` increments and each reversal branch `2 * steps`.
pub fn trace_hysteresis_loop(
    sheet: &SheetModel,
    i_max: f64,
    steps: usize,
) -> Result<HysteresisLoop> {
    if !(i_max > 0.0) {
        return Err(Error::Domain(format!(
            "loop amplitude must be positive, got {i_max}"
        )));
    }
    sheet.check_current(i_max)?;
    if steps < 8 {
        return Err(Error::Domain(format!("need at least 8 steps, got {steps}")));
    }
    let b = sheet.b_sat;
    let mut points = Vec::with_capacity(5 * steps + 3);
    for k in 0..=steps {
        let i = i_max * k as f64 / steps as f64;
        points.push(LoopPoint {
            current_amps: i,
            flux_tesla: b * sheet.reach(i),
            branch: Branch::Initial,
        });
    }
    let n = 2 * steps;
    for k in 0..=n {
        let i = i_max - 2.0 * i_max * k as f64 / n as f64;
        points.push(LoopPoint {
            current_amps: i,
            flux_tesla: b * sheet.descending(i_max, i),
            branch: Branch::Descending,
        });
    }
    for k in 0..=n {
        let i = -i_max + 2.0 * i_max * k as f64 / n as f64;
        points.push(LoopPoint {
            current_amps: i,
            flux_tesla: b * sheet.ascending(i_max, i),
            branch: Branch::Ascending,
        });
    }
    Ok(HysteresisLoop { i_max, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn emag_examples() {
        let m = ElectromagnetModel::default();
        assert_eq!(m.field(0.0).unwrap(), 0.0);
        let top = m.field(10.0).unwrap();
        assert!((top - 0.302).abs() <= 0.02 * 0.302, "{top}");
        assert_eq!(m.field(-10.0).unwrap(), -top);
        assert!(matches!(m.field(15.5), Err(Error::OutOfRange(_))));
        assert!(m.field(15.0).is_ok());
    }

    #[test]
    fn emag_noise_matches_sigma() {
        let m = ElectromagnetModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| m.measure(5.0, &mut rng).unwrap() - m.field(5.0).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 1.01e-3).abs() < 0.05 * 1.01e-3);
        let quiet = ElectromagnetModel {
            noise_sigma: 0.0,
            ..m
        };
        assert_eq!(
            quiet.measure(5.0, &mut rng).unwrap(),
            quiet.field(5.0).unwrap()
        );
    }

    #[test]
    fn reach_profile() {
        let s = SheetModel::default();
        assert_eq!(s.reach(0.0), 0.0);
        assert!((s.reach(10.0) - 1.0).abs() < 1e-15);
        assert!(s.reach(3.3) < s.reach(6.6) && s.reach(6.6) < s.reach(10.0));
        assert!((s.reach(3.3) - 0.55).abs() < 0.01, "{}", s.reach(3.3));
        assert!((s.reach(6.6) - 0.87).abs() < 0.01, "{}", s.reach(6.6));
        let mut prev = -1.0;
        for k in 0..=1000 {
            let r = s.reach(k as f64 * 0.01);
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn coercive_current_zeroes_major_loop() {
        let s = SheetModel::default();
        let ic = s.i_coercive();
        assert!((s.reach(ic) - 0.25).abs() < 1e-9);
        assert!(s.descending(10.0, -ic).abs() < 1e-9);
    }

    #[test]
    fn program_examples() {
        let s = SheetModel::default();
        let up = program_pixel(&s, PixelState::DEMAGNETIZED, 10.0).unwrap();
        assert_eq!(up, PixelState::NORTH);
        assert!((up.flux(&s) - 0.0344).abs() < 1e-15);
        assert_eq!(
            program_pixel(&s, PixelState::NORTH, -10.0).unwrap(),
            PixelState::SOUTH
        );
        assert_eq!(
            program_pixel(&s, PixelState::NORTH, -s.i_coercive()).unwrap(),
            PixelState::DEMAGNETIZED
        );
        assert_eq!(
            program_pixel(&s, PixelState::SOUTH, 1.37).unwrap(),
            PixelState::DEMAGNETIZED
        );
        let half = PixelState::new(0.5).unwrap();
        assert_eq!(program_pixel(&s, half, 0.0).unwrap(), half);
        assert!(matches!(
            program_pixel(&s, half, 10.5),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn current_for_target_examples() {
        let s = SheetModel::default();
        assert_eq!(current_for_target(&s, 1.0).unwrap(), 10.0);
        assert_eq!(current_for_target(&s, -1.0).unwrap(), -10.0);
        assert_eq!(current_for_target(&s, 0.0).unwrap(), 0.0);
        assert!((current_for_target(&s, s.reach(3.3)).unwrap() - 3.3).abs() < 1e-6);
        assert!(matches!(current_for_target(&s, 1.2), Err(Error::Domain(_))));
    }

    #[test]
    fn loop_errors() {
        let s = SheetModel::default();
        assert!(matches!(
            trace_hysteresis_loop(&s, 0.0, 16),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            trace_hysteresis_loop(&s, -1.0, 16),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            trace_hysteresis_loop(&s, 5.0, 4),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            trace_hysteresis_loop(&s, 11.0, 16),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn major_loop_shape() {
        let s = SheetModel::default();
        let l = trace_hysteresis_loop(&s, 10.0, 50).unwrap();
        let desc: Vec<_> = l.branch(Branch::Descending).collect();
        let asc: Vec<_> = l.branch(Branch::Ascending).collect();
        let init: Vec<_> = l.branch(Branch::Initial).collect();
        assert!((desc[0].flux_tesla - 0.0344).abs() < 1e-12);
        assert!((desc.last().unwrap().flux_tesla + 0.0344).abs() < 1e-12);
        assert_eq!(init.last().unwrap().flux_tesla, desc[0].flux_tesla);
        assert_eq!(desc.last().unwrap().flux_tesla, asc[0].flux_tesla);
        assert_eq!(asc.last().unwrap().flux_tesla, desc[0].flux_tesla);
        let at_zero = desc.iter().find(|p| p.current_amps == 0.0).unwrap();
        assert!(at_zero.flux_tesla >= 0.99 * 0.0344);
        assert!(l.signed_area() > 0.0);
    }

    #[test]
    fn csv_export() {
        let s = SheetModel::default();
        let csv = trace_hysteresis_loop(&s, 3.3, 8).unwrap().to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("current_amps,flux_tesla,branch_label"));
        assert_eq!(lines.next(), Some("0.0000,0.000000,initial"));
        assert_eq!(csv.lines().count(), 1 + 9 + 17 + 17);
    }

    proptest! {
        #[test]
        fn emag_odd_increasing_bounded(i in -15.0..15.0f64, d in 1e-6..1.0f64) {
            let m = ElectromagnetModel::default();
            let b = m.field(i).unwrap();
            prop_assert_eq!(b, -m.field(-i).unwrap());
            prop_assert!(b.abs() <= m.b_sat_tip);
            if i + d <= 15.0 {
                prop_assert!(m.field(i + d).unwrap() > b);
            }
        }

        #[test]
        fn program_idempotent(m in -1.0..=1.0f64, i in -10.0..=10.0f64) {
            let s = SheetModel::default();
            // A coercive pulse is the one history-dependent case.
            prop_assume!((i.abs() - s.i_coercive()).abs() > COERCIVE_TOLERANCE_A);
            let st = PixelState::new(m).unwrap();
            let once = program_pixel(&s, st, i).unwrap();
            prop_assert_eq!(program_pixel(&s, once, i).unwrap(), once);
        }

        #[test]
        fn overwrite_from_either_saturation(i in 0.01..=10.0f64) {
            let s = SheetModel::default();
            prop_assume!((i - s.i_coercive()).abs() > COERCIVE_TOLERANCE_A);
            prop_assert_eq!(
                program_pixel(&s, PixelState::NORTH, -i).unwrap(),
                program_pixel(&s, PixelState::SOUTH, -i).unwrap()
            );
        }

        #[test]
        fn current_inverts_reach(i in 0.0..=10.0f64) {
            let s = SheetModel::default();
            let back = current_for_target(&s, s.reach(i)).unwrap();
            prop_assert!((back - i).abs() < 1e-6);
            let target = s.reach(i);
            if target > 0.0 && (back - s.i_coercive()).abs() > COERCIVE_TOLERANCE_A {
                let st = program_pixel(&s, PixelState::SOUTH, back).unwrap();
                prop_assert!((st.m() - target).abs() < 1e-6);
            }
        }

        #[test]
        fn smaller_loops_nest_inside_larger(i1 in 0.05..10.0f64, gap in 0.01..10.0f64, t in -1.0..=1.0f64) {
            let s = SheetModel::default();
            let i2 = (i1 + gap).min(10.0);
            prop_assume!(i2 > i1);
            let i = t * i1;
            let (lo, hi) = (s.ascending(i2, i), s.descending(i2, i));
            for v in [s.descending(i1, i), s.ascending(i1, i)] {
                prop_assert!(lo < v && v < hi, "i1={} i2={} I={} {} < {} < {}", i1, i2, i, lo, v, hi);
            }
        }
    }
}
