//! Array geometries, steering vectors, calibration errors and the narrowband
//! snapshot model `x(n) = s₀(n)a₀ + Σ sₖ(n)aₖ + v(n)`.
//!
//! Element phases are referenced to element 0. For a uniform linear array the
//! element `m` has phase `2π·d·m·sin θ`. A uniform planar array is modelled as
//! lying in the x–z plane: the element at grid position `(m, n)` (row `m` along
//! x, column `n` along z) has phase `2π·d·(m·cos ψ·cos ϑ + n·sin ψ)` for
//! azimuth `ϑ ∈ [0°, 180°]` and elevation `ψ ∈ [−90°, 90°]`. Element `(m, n)`
//! is entry `m·cols + n` of the steering vector.
//!
//! Random draws use [`ChaCha8Rng`], so every Monte Carlo run is reproducible
//! from `(seed, stream)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, CMatrix, CVector, HermitianMatrix};

pub type SimRng = ChaCha8Rng;

/// Generator for stream `stream` of experiment seed `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrayGeometry {
    UniformLinear {
        elements: usize,
        #[serde(default = "half_wavelength")]
        spacing: f64,
    },
    UniformPlanar {
        rows: usize,
        cols: usize,
        #[serde(default = "half_wavelength")]
        spacing: f64,
    },
}

fn half_wavelength() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn linear(elements: usize) -> Self {
        Self::UniformLinear {
            elements,
            spacing: 0.5,
        }
    }

    pub fn planar(rows: usize, cols: usize) -> Self {
        Self::UniformPlanar {
            rows,
            cols,
            spacing: 0.5,
        }
    }

    pub fn elements(&self) -> usize {
        match *self {
            Self::UniformLinear { elements, .. } => elements,
            Self::UniformPlanar { rows, cols, .. } => rows * cols,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (count_ok, spacing) = match *self {
            Self::UniformLinear { elements, spacing } => (elements >= 1, spacing),
            Self::UniformPlanar {
                rows,
                cols,
                spacing,
            } => (rows >= 1 && cols >= 1, spacing),
        };
        if !count_ok {
            return Err(Error::InvalidParameter(
                "array element counts must be at least 1".into(),
            ));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        Ok(())
    }
}

/// A look direction in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Direction {
    /// Angle from broadside of a linear array, in [−90°, 90°].
    Linear(f64),
    /// Azimuth in [0°, 180°] and elevation in [−90°, 90°].
    Planar { azimuth: f64, elevation: f64 },
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Linear(a) => write!(f, "{a}°"),
            Self::Planar {
                azimuth,
                elevation,
            } => write!(f, "({azimuth}°, {elevation}°)"),
        }
    }
}

const ANGLE_SLACK: f64 = 1e-9;

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    x.is_finite() && x >= lo - ANGLE_SLACK && x <= hi + ANGLE_SLACK
}

impl Direction {
    pub fn planar(azimuth: f64, elevation: f64) -> Self {
        Self::Planar {
            azimuth,
            elevation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Linear(a) => in_range(a, -90.0, 90.0),
            Self::Planar {
                azimuth,
                elevation,
            } => in_range(azimuth, 0.0, 180.0) && in_range(elevation, -90.0, 90.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DirectionOutOfRange(self.to_string()))
        }
    }

    /// Shift by `offset` degrees (applied to both angles for planar directions).
    pub fn offset(&self, offset: f64) -> Self {
        match *self {
            Self::Linear(a) => Self::Linear(a + offset),
            Self::Planar {
                azimuth,
                elevation,
            } => Self::planar(azimuth + offset, elevation + offset),
        }
    }
}

/// Array response to a unit plane wave from `d`.
pub fn steering_vector(geometry: &ArrayGeometry, d: &Direction) -> Result<CVector> {
    geometry.validate()?;
    d.validate()?;
    match (*geometry, *d) {
        (ArrayGeometry::UniformLinear { elements, spacing }, Direction::Linear(theta)) => {
            let k = 2.0 * PI * spacing * theta.to_radians().sin();
            Ok(CVector::from_fn(elements, |m, _| {
                Complex64::from_polar(1.0, k * m as f64)
            }))
        }
        (
            ArrayGeometry::UniformPlanar {
                rows,
                cols,
                spacing,
            },
            Direction::Planar {
                azimuth,
                elevation,
            },
        ) => {
            let (az, el) = (azimuth.to_radians(), elevation.to_radians());
            let kx = 2.0 * PI * spacing * el.cos() * az.cos();
            let kz = 2.0 * PI * spacing * el.sin();
            Ok(CVector::from_fn(rows * cols, |i, _| {
                let (m, n) = (i / cols, i % cols);
                Complex64::from_polar(1.0, kx * m as f64 + kz * n as f64)
            }))
        }
        _ => Err(Error::InvalidParameter(format!(
            "direction {d} does not match the array geometry"
        ))),
    }
}

/// Steering vectors for several directions, stacked as columns.
pub fn steering_matrix(geometry: &ArrayGeometry, directions: &[Direction]) -> Result<CMatrix> {
    let cols = directions
        .iter()
        .map(|d| steering_vector(geometry, d))
        .collect::<Result<Vec<_>>>()?;
    if cols.is_empty() {
        return Ok(CMatrix::zeros(geometry.elements(), 0));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Per-element gain and phase errors of an imperfectly calibrated array.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub gains: Vec<f64>,
    pub phases: Vec<f64>,
}

impl Calibration {
    pub fn ideal(m: usize) -> Self {
        Self {
            gains: vec![1.0; m],
            phases: vec![0.0; m],
        }
    }

    /// Gains from `N(1, gain_std²)`, phases (radians) from `N(0, phase_std²)`.
    pub fn draw<R: Rng + ?Sized>(m: usize, gain_std: f64, phase_std: f64, rng: &mut R) -> Result<Self> {
        let gain = Normal::new(1.0, gain_std)
            .map_err(|_| Error::InvalidParameter(format!("gain std {gain_std}")))?;
        let phase = Normal::new(0.0, phase_std)
            .map_err(|_| Error::InvalidParameter(format!("phase std {phase_std}")))?;
        let gains = (0..m).map(|_| gain.sample(rng)).collect();
        let phases = (0..m).map(|_| phase.sample(rng)).collect();
        Ok(Self { gains, phases })
    }

    /// Calibration errors of the synthesis study: gains `N(1, κ²)`, phases
    /// `N(0, (κπ/2)²)`.
    pub fn draw_kappa<R: Rng + ?Sized>(m: usize, kappa: f64, rng: &mut R) -> Result<Self> {
        Self::draw(m, kappa, kappa * PI / 2.0, rng)
    }

    pub fn factors(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.gains
            .iter()
            .zip(&self.phases)
            .map(|(&g, &p)| Complex64::from_polar(g, p))
    }

    pub fn apply(&self, a: &CVector) -> CVector {
        CVector::from_iterator(a.len(), a.iter().zip(self.factors()).map(|(x, f)| x * f))
    }

    /// Weights `w'` such that `w'ᴴa = wᴴ(apply(a))` for every `a`.
    pub fn fold_into_weights(&self, w: &CVector) -> CVector {
        CVector::from_iterator(
            w.len(),
            w.iter().zip(self.factors()).map(|(x, f)| x * f.conj()),
        )
    }
}

/// Applies random per-element gain and phase errors to one steering vector.
pub fn perturb_gain_phase<R: Rng + ?Sized>(
    a: &CVector,
    gain_std: f64,
    phase_std: f64,
    rng: &mut R,
) -> Result<CVector> {
    if !(gain_std >= 0.0 && phase_std >= 0.0) {
        return Err(Error::InvalidParameter(
            "perturbation standard deviations must be non-negative".into(),
        ));
    }
    Ok(Calibration::draw(a.len(), gain_std, phase_std, rng)?.apply(a))
}

fn uniform_around<R: Rng + ?Sized>(x: f64, half_width: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    if half_width == 0.0 {
        return x;
    }
    let u: f64 = rng.random();
    (x + half_width * (2.0 * u - 1.0)).clamp(lo, hi)
}

/// Direction estimate drawn uniformly within `half_width` degrees of the true
/// direction and clipped to the valid range.
pub fn draw_doa_estimate<R: Rng + ?Sized>(
    truth: &Direction,
    half_width: f64,
    rng: &mut R,
) -> Result<Direction> {
    if !(half_width >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "DoA half-width must be non-negative, got {half_width}"
        )));
    }
    Ok(match *truth {
        Direction::Linear(a) => Direction::Linear(uniform_around(a, half_width, -90.0, 90.0, rng)),
        Direction::Planar {
            azimuth,
            elevation,
        } => Direction::planar(
            uniform_around(azimuth, half_width, 0.0, 180.0, rng),
            uniform_around(elevation, half_width, -90.0, 90.0, rng),
        ),
    })
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(power: f64, rng: &mut R) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub direction: Direction,
    pub power: f64,
}

/// A narrowband scene with calibration and direction-finding errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub target: Source,
    pub interferers: Vec<Source>,
    pub noise_power: f64,
    /// Half-width in degrees of the uniform DoA estimation error.
    #[serde(default)]
    pub doa_error: f64,
    #[serde(default)]
    pub gain_std: f64,
    /// Standard deviation of the element phase error, in radians.
    #[serde(default)]
    pub phase_std: f64,
}

/// One random draw of a [`Scenario`]: true (perturbed) array responses and the
/// direction estimates available to the beamformer.
#[derive(Debug, Clone)]
pub struct Realization {
    pub calibration: Calibration,
    pub true_target: CVector,
    pub true_interferers: Vec<CVector>,
    pub estimated_target: Direction,
    pub estimated_interferers: Vec<Direction>,
}

impl Scenario {
    /// The antenna-array setting: 20-element ULA, target at −5°, interferers
    /// at −60°, −20° and 45° with 30 dB INR, unit noise power, ±2° DoA errors
    /// and calibration errors `N(1, 0.02²)`, `N(0, (0.01π)²)`.
    pub fn antenna_benchmark(snr_db: f64) -> Self {
        let inr = db_to_power(30.0);
        Self {
            geometry: ArrayGeometry::linear(20),
            target: Source {
                direction: Direction::Linear(-5.0),
                power: db_to_power(snr_db),
            },
            interferers: [-60.0, -20.0, 45.0]
                .iter()
                .map(|&a| Source {
                    direction: Direction::Linear(a),
                    power: inr,
                })
                .collect(),
            noise_power: 1.0,
            doa_error: 2.0,
            gain_std: 0.02,
            phase_std: 0.01 * PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let sources = std::iter::once(&self.target).chain(&self.interferers);
        for s in sources.clone() {
            s.direction.validate()?;
            if !(s.power >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "source power must be non-negative, got {}",
                    s.power
                )));
            }
        }
        let dirs: Vec<_> = sources.map(|s| s.direction).collect();
        for (i, a) in dirs.iter().enumerate() {
            if dirs[i + 1..].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "source directions must be distinct, {a} repeats"
                )));
            }
        }
        if !(self.noise_power >= 0.0 && self.doa_error >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise power and DoA error must be non-negative".into(),
            ));
        }
        if !(self.gain_std >= 0.0 && self.phase_std >= 0.0) {
            return Err(Error::InvalidParameter(
                "perturbation standard deviations must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Error-free realization: presumed and true responses coincide.
    pub fn nominal(&self) -> Result<Realization> {
        self.validate()?;
        let m = self.geometry.elements();
        Ok(Realization {
            calibration: Calibration::ideal(m),
            true_target: steering_vector(&self.geometry, &self.target.direction)?,
            true_interferers: self
                .interferers
                .iter()
                .map(|s| steering_vector(&self.geometry, &s.direction))
                .collect::<Result<_>>()?,
            estimated_target: self.target.direction,
            estimated_interferers: self.interferers.iter().map(|s| s.direction).collect(),
        })
    }

    /// Draws direction estimates for every source and one set of element
    /// calibration errors. Sources stay at their true directions; only the
    /// estimates are displaced.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Realization> {
        self.validate()?;
        let estimated_target = draw_doa_estimate(&self.target.direction, self.doa_error, rng)?;
        let estimated_interferers = self
            .interferers
            .iter()
            .map(|s| draw_doa_estimate(&s.direction, self.doa_error, rng))
            .collect::<Result<Vec<_>>>()?;
        let calibration =
            Calibration::draw(self.geometry.elements(), self.gain_std, self.phase_std, rng)?;
        let true_target = calibration.apply(&steering_vector(&self.geometry, &self.target.direction)?);
        let true_interferers = self
            .interferers
            .iter()
            .map(|s| Ok(calibration.apply(&steering_vector(&self.geometry, &s.direction)?)))
            .collect::<Result<_>>()?;
        Ok(Realization {
            calibration,
            true_target,
            true_interferers,
            estimated_target,
            estimated_interferers,
        })
    }

    /// `n` snapshots of the array output using the realization's true
    /// responses.
    pub fn generate_snapshots<R: Rng + ?Sized>(
        &self,
        realization: &Realization,
        n: usize,
        include_target: bool,
        rng: &mut R,
    ) -> Result<Vec<CVector>> {
        if n == 0 {
            return Err(Error::InvalidParameter("snapshot count must be at least 1".into()));
        }
        let m = self.geometry.elements();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = CVector::zeros(m);
            if include_target {
                let s0 = complex_gaussian(self.target.power, rng);
                x.axpy(s0, &realization.true_target, Complex64::from(1.0));
            }
            for (src, a) in self.interferers.iter().zip(&realization.true_interferers) {
                let s = complex_gaussian(src.power, rng);
                x.axpy(s, a, Complex64::from(1.0));
            }
            for xi in x.iter_mut() {
                *xi += complex_gaussian(self.noise_power, rng);
            }
            out.push(x);
        }
        Ok(out)
    }

    /// `Σ σₖ² āₖāₖᴴ + σᵥ² I` from the true responses.
    pub fn interference_plus_noise(&self, realization: &Realization) -> HermitianMatrix {
        let m = self.geometry.elements();
        let mut r = CMatrix::identity(m, m) * Complex64::from(self.noise_power);
        for (src, a) in self.interferers.iter().zip(&realization.true_interferers) {
            r += a * a.adjoint() * Complex64::from(src.power);
        }
        HermitianMatrix::new(r).expect("sum of outer products is Hermitian")
    }

    /// Output SINR in dB of beamformer `w` against the true scene.
    pub fn output_sinr(&self, realization: &Realization, w: &CVector) -> Result<f64> {
        if w.len() != self.geometry.elements() {
            return Err(Error::Dimension(format!(
                "beamformer has {} weights for {} elements",
                w.len(),
                self.geometry.elements()
            )));
        }
        if w.norm() == 0.0 {
            return Err(Error::InvalidParameter("beamformer is zero".into()));
        }
        let signal = self.target.power * inner(w, &realization.true_target).norm_sqr();
        let noise = self.interference_plus_noise(realization).quadratic_form(w);
        if !(noise > 0.0) {
            return Err(Error::InvalidParameter(
                "interference-plus-noise power at the output is zero".into(),
            ));
        }
        Ok(10.0 * (signal / noise).log10())
    }

    /// `σ₀² ā₀ᴴR̄⁻¹ā₀` in dB, the SINR of the clairvoyant MVDR beamformer.
    pub fn optimal_sinr(&self, realization: &Realization) -> Result<f64> {
        let r = self.interference_plus_noise(realization);
        let q = r.eig();
        q.require_positive_definite()?;
        Ok(10.0 * (self.target.power * q.inverse_quadratic(&realization.true_target)).log10())
    }

    /// `R̄⁻¹ā₀`, the direction of the optimal beamformer.
    pub fn optimal_weights(&self, realization: &Realization) -> Result<CVector> {
        self.interference_plus_noise(realization)
            .solve(&realization.true_target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sample_covariance;

    #[test]
    fn broadside_is_all_ones() {
        let a = steering_vector(&ArrayGeometry::linear(5), &Direction::Linear(0.0)).unwrap();
        for x in a.iter() {
            assert!((x - Complex64::from(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn endfire_two_elements() {
        let a = steering_vector(&ArrayGeometry::linear(2), &Direction::Linear(90.0)).unwrap();
        assert!((a[0] - Complex64::from(1.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::from(-1.0)).norm() < 1e-12);
    }

    #[test]
    fn planar_unit_modulus() {
        let mut rng = seeded_rng(3, 0);
        let g = ArrayGeometry::planar(2, 2);
        for _ in 0..20 {
            let d = Direction::planar(180.0 * rng.random::<f64>(), 180.0 * rng.random::<f64>() - 90.0);
            let a = steering_vector(&g, &d).unwrap();
            assert!((a.norm_squared() - 4.0).abs() < 1e-12);
            assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn planar_elevation_is_not_mirrored() {
        let g = ArrayGeometry::planar(4, 4);
        let up = steering_vector(&g, &Direction::planar(90.0, 15.0)).unwrap();
        let down = steering_vector(&g, &Direction::planar(90.0, -15.0)).unwrap();
        assert!((up - down).norm() > 1.0);
    }

    #[test]
    fn out_of_range_and_mismatch() {
        let g = ArrayGeometry::linear(4);
        assert!(matches!(
            steering_vector(&g, &Direction::Linear(91.0)),
            Err(Error::DirectionOutOfRange(_))
        ));
        assert!(steering_vector(&g, &Direction::planar(10.0, 10.0)).is_err());
        assert!(steering_vector(&ArrayGeometry::planar(2, 2), &Direction::planar(190.0, 0.0)).is_err());
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let a = steering_vector(&ArrayGeometry::linear(6), &Direction::Linear(20.0)).unwrap();
        let mut rng = seeded_rng(1, 0);
        let b = perturb_gain_phase(&a, 0.0, 0.0, &mut rng).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn perturbation_energy_matches_expectation() {
        // E|g e^{jφ} − 1|² = σg² + 2(1 − e^{−σp²/2}) ≈ σg² + σp² for small σp.
        let m = 10;
        let a = steering_vector(&ArrayGeometry::linear(m), &Direction::Linear(0.0)).unwrap();
        let (sg, sp) = (0.02, 0.01 * PI);
        let mut rng = seeded_rng(5, 0);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| (perturb_gain_phase(&a, sg, sp, &mut rng).unwrap() - &a).norm_squared())
            .sum::<f64>()
            / draws as f64;
        let expected = m as f64 * (sg * sg + sp * sp);
        assert!((mean - expected).abs() < 0.03 * expected, "{mean} vs {expected}");
    }

    #[test]
    fn folded_weights_match_perturbed_response() {
        let mut rng = seeded_rng(9, 0);
        let cal = Calibration::draw_kappa(8, 0.1, &mut rng).unwrap();
        let a = steering_vector(&ArrayGeometry::linear(8), &Direction::Linear(12.0)).unwrap();
        let w = CVector::from_fn(8, |i, _| Complex64::new(i as f64, 1.0));
        let lhs = inner(&cal.fold_into_weights(&w), &a);
        let rhs = inner(&w, &cal.apply(&a));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn doa_estimates() {
        let mut rng = seeded_rng(2, 0);
        let t = Direction::Linear(-5.0);
        assert_eq!(draw_doa_estimate(&t, 0.0, &mut rng).unwrap(), t);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let Direction::Linear(a) = draw_doa_estimate(&t, 2.0, &mut rng).unwrap() else {
                unreachable!()
            };
            assert!((-7.0..=-3.0).contains(&a));
            sum += a;
        }
        assert!((sum / n as f64 + 5.0).abs() < 0.1);
        let Direction::Linear(edge) = draw_doa_estimate(&Direction::Linear(89.5), 2.0, &mut rng).unwrap() else {
            unreachable!()
        };
        assert!(edge <= 90.0);
    }

    fn quiet_scenario(m: usize) -> Scenario {
        Scenario {
            geometry: ArrayGeometry::linear(m),
            target: Source {
                direction: Direction::Linear(0.0),
                power: 0.0,
            },
            interferers: vec![],
            noise_power: 0.0,
            doa_error: 0.0,
            gain_std: 0.0,
            phase_std: 0.0,
        }
    }

    #[test]
    fn silent_scene_gives_zero_snapshots() {
        let s = quiet_scenario(4);
        let real = s.nominal().unwrap();
        let mut rng = seeded_rng(0, 0);
        let x = s.generate_snapshots(&real, 5, true, &mut rng).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn white_noise_covariance_concentrates() {
        let mut s = quiet_scenario(4);
        s.noise_power = 1.0;
        let real = s.nominal().unwrap();
        let mut rng = seeded_rng(4, 0);
        let x = s.generate_snapshots(&real, 10_000, false, &mut rng).unwrap();
        let r = sample_covariance(&x).unwrap();
        assert!(r.frobenius_distance(&CMatrix::identity(4, 4)) < 0.1);
    }

    #[test]
    fn matched_filter_sinr() {
        let m = 8;
        let mut s = quiet_scenario(m);
        s.target.power = 2.0;
        s.noise_power = 0.5;
        let real = s.nominal().unwrap();
        let w = &real.true_target / Complex64::from(m as f64);
        let sinr = s.output_sinr(&real, &w).unwrap();
        let expected = 10.0 * (2.0 * m as f64 / 0.5).log10();
        assert!((sinr - expected).abs() < 1e-10);
        let scaled = &w * Complex64::new(-3.0, 2.0);
        assert!((s.output_sinr(&real, &scaled).unwrap() - sinr).abs() < 1e-10);
        assert!(s.output_sinr(&real, &CVector::zeros(m)).is_err());
    }

    #[test]
    fn optimal_weights_attain_optimal_sinr() {
        let s = Scenario::antenna_benchmark(10.0);
        let mut rng = seeded_rng(8, 0);
        let real = s.realize(&mut rng).unwrap();
        let w = s.optimal_weights(&real).unwrap();
        let got = s.output_sinr(&real, &w).unwrap();
        let best = s.optimal_sinr(&real).unwrap();
        assert!((got - best).abs() < 1e-9);
        // any other beamformer is worse
        let matched = real.true_target.clone();
        assert!(s.output_sinr(&real, &matched).unwrap() <= best + 1e-9);
    }

    #[test]
    fn duplicate_directions_rejected() {
        let mut s = Scenario::antenna_benchmark(0.0);
        s.interferers[0].direction = Direction::Linear(-5.0);
        assert!(s.validate().is_err());
    }
}
