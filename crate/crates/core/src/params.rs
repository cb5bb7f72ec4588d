//! Physical constants, the programmable bias generator and device mismatch.
//!
//! Every bias in the core is a subthreshold current. Biases are either given
//! as literal currents or as 10-bit codes (3-bit coarse octave, 7-bit fine
//! fraction) which the bias generator turns into amperes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subthreshold device constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Thermal voltage U_T in volts.
    pub thermal_voltage: f64,
    /// Subthreshold slope factor.
    pub kappa: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            thermal_voltage: 0.02585,
            kappa: 0.70,
        }
    }
}

impl PhysicalConstants {
    pub fn new(thermal_voltage: f64, kappa: f64) -> Result<Self> {
        if !(thermal_voltage > 0.0 && thermal_voltage.is_finite()) {
            return Err(Error::invalid(format!(
                "thermal voltage must be positive, got {thermal_voltage}"
            )));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::invalid(format!(
                "kappa must be in (0, 1], got {kappa}"
            )));
        }
        Ok(Self {
            thermal_voltage,
            kappa,
        })
    }

    /// U_T / kappa, the voltage scale of the DPI time constant.
    #[inline]
    pub fn ut_over_kappa(&self) -> f64 {
        self.thermal_voltage / self.kappa
    }
}

/// A non-negative, finite current in amperes.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurrentValue(f64);

impl CurrentValue {
    pub const ZERO: CurrentValue = CurrentValue(0.0);

    pub fn new(amps: f64) -> Result<Self> {
        if amps.is_finite() && amps >= 0.0 {
            Ok(Self(amps))
        } else {
            Err(Error::invalid(format!(
                "current must be finite and non-negative, got {amps}"
            )))
        }
    }

    #[inline]
    pub fn amps(self) -> f64 {
        self.0
    }
}

/// 10-bit bias code: `coarse * 128 + fine`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BiasCode {
    pub coarse: u8,
    pub fine: u8,
}

impl BiasCode {
    pub const MAX_COARSE: u8 = 7;
    pub const MAX_FINE: u8 = 127;

    pub fn new(coarse: u8, fine: u8) -> Result<Self> {
        let code = Self { coarse, fine };
        code.validate()?;
        Ok(code)
    }

    /// Split a packed 10-bit value into coarse/fine fields.
    pub fn from_value(value: u16) -> Result<Self> {
        if value > 1023 {
            return Err(Error::invalid(format!("bias code {value} exceeds 10 bits")));
        }
        Ok(Self {
            coarse: (value >> 7) as u8,
            fine: (value & 0x7f) as u8,
        })
    }

    pub fn value(self) -> u16 {
        self.coarse as u16 * 128 + self.fine as u16
    }

    fn validate(self) -> Result<()> {
        if self.coarse > Self::MAX_COARSE {
            return Err(Error::invalid(format!(
                "coarse code {} out of range 0..=7",
                self.coarse
            )));
        }
        if self.fine > Self::MAX_FINE {
            return Err(Error::invalid(format!(
                "fine code {} out of range 0..=127",
                self.fine
            )));
        }
        Ok(())
    }
}

/// Code-to-current law of the bias generator.
///
/// `I = (fine / 128) * base * ratio^coarse`. The defaults (60 pA, 8x per
/// octave) span 60 pA to about 126 uA at full scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasGenerator {
    pub base: f64,
    pub octave_ratio: f64,
}

impl Default for BiasGenerator {
    fn default() -> Self {
        Self {
            base: 60e-12,
            octave_ratio: 8.0,
        }
    }
}

impl BiasGenerator {
    pub fn coarse_current(&self, coarse: u8) -> f64 {
        self.base * self.octave_ratio.powi(coarse as i32)
    }

    pub fn decode(&self, code: BiasCode) -> Result<CurrentValue> {
        code.validate()?;
        CurrentValue::new(code.fine as f64 / 128.0 * self.coarse_current(code.coarse))
    }
}

/// Decode a bias code with the default generator law.
pub fn decode_bias(code: BiasCode) -> Result<CurrentValue> {
    BiasGenerator::default().decode(code)
}

/// Time constant of a current-mode low-pass filter: `C * U_T / (kappa * I_tau)`.
pub fn tau_from_bias(cap: f64, i_tau: CurrentValue, consts: &PhysicalConstants) -> Result<f64> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::invalid(format!(
            "capacitance must be positive, got {cap}"
        )));
    }
    if i_tau.amps() == 0.0 {
        return Err(Error::InfiniteTimeConstant);
    }
    Ok(cap * consts.ut_over_kappa() / i_tau.amps())
}

/// Inverse of [`tau_from_bias`]: the bias current that yields time constant `tau`.
pub fn bias_for_tau(cap: f64, tau: f64, consts: &PhysicalConstants) -> Result<CurrentValue> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!(
            "time constant must be positive, got {tau}"
        )));
    }
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::invalid(format!(
            "capacitance must be positive, got {cap}"
        )));
    }
    CurrentValue::new(cap * consts.ut_over_kappa() / tau)
}

/// Multiplicative lognormal mismatch, one independent draw per device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchModel {
    pub sigma_ln: f64,
    pub seed: u64,
}

impl Default for MismatchModel {
    fn default() -> Self {
        Self {
            sigma_ln: 0.05,
            seed: 0,
        }
    }
}

impl MismatchModel {
    pub fn new(sigma_ln: f64, seed: u64) -> Result<Self> {
        if !(sigma_ln >= 0.0 && sigma_ln.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma_ln must be >= 0, got {sigma_ln}"
            )));
        }
        Ok(Self { sigma_ln, seed })
    }

    pub fn ideal() -> Self {
        Self {
            sigma_ln: 0.0,
            seed: 0,
        }
    }

    /// Multiplicative factor `exp(g)` of device `device_index`.
    ///
    /// Each device reads its own ChaCha stream, so the value depends only on
    /// `(seed, device_index)` and never on call order.
    pub fn factor(&self, device_index: u64) -> f64 {
        if self.sigma_ln == 0.0 {
            return 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(device_index);
        let normal = Normal::new(0.0, self.sigma_ln).expect("sigma validated");
        normal.sample(&mut rng).exp()
    }
}

/// Mismatched instance of a nominal current.
pub fn sample_mismatch(
    nominal: CurrentValue,
    model: &MismatchModel,
    device_index: u64,
) -> CurrentValue {
    if model.sigma_ln == 0.0 {
        return nominal;
    }
    CurrentValue(nominal.amps() * model.factor(device_index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Hand-evaluated: (fine/128) * 60 pA * 8^coarse.
    const GOLDEN_BIAS: &[(u8, u8, f64)] = &[
        (0, 0, 0.0),
        (0, 64, 30e-12),
        (2, 96, 2.88e-9),
        (1, 127, 127.0 / 128.0 * 480e-12),
        (7, 127, 127.0 / 128.0 * 60e-12 * 2_097_152.0),
    ];

    #[test]
    fn decode_bias_golden_table() {
        for &(coarse, fine, expected) in GOLDEN_BIAS {
            let got = decode_bias(BiasCode::new(coarse, fine).unwrap())
                .unwrap()
                .amps();
            if expected == 0.0 {
                assert_eq!(got, 0.0);
            } else {
                assert!(
                    rel(got, expected) < 1e-12,
                    "({coarse},{fine}): {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn decode_bias_rejects_out_of_range() {
        assert!(BiasCode::new(0, 128).is_err());
        assert!(BiasCode::new(8, 0).is_err());
        let raw = BiasCode { coarse: 9, fine: 0 };
        assert!(matches!(decode_bias(raw), Err(Error::InvalidArgument(_))));
        assert!(BiasCode::from_value(1024).is_err());
    }

    #[test]
    fn code_value_round_trip() {
        let c = BiasCode::from_value(2 * 128 + 96).unwrap();
        assert_eq!(
            c,
            BiasCode {
                coarse: 2,
                fine: 96
            }
        );
        assert_eq!(c.value(), 352);
    }

    #[test]
    fn tau_examples() {
        let k = PhysicalConstants::default();
        let i5 = CurrentValue::new(5e-12).unwrap();
        let t1 = tau_from_bias(1e-12, i5, &k).unwrap();
        assert!((t1 - 7.386e-3).abs() < 5e-7, "{t1}");
        let t15 = tau_from_bias(1.5e-12, i5, &k).unwrap();
        assert!((t15 - 11.08e-3).abs() < 5e-6, "{t15}");
        assert!(rel(t15, 1.5 * t1) < 1e-14);
        let t10 = tau_from_bias(1e-12, CurrentValue::new(10e-12).unwrap(), &k).unwrap();
        assert!(rel(t10, t1 / 2.0) < 1e-14);
    }

    #[test]
    fn tau_zero_current_is_infinite() {
        let k = PhysicalConstants::default();
        assert_eq!(
            tau_from_bias(1e-12, CurrentValue::ZERO, &k),
            Err(Error::InfiniteTimeConstant)
        );
        assert!(tau_from_bias(0.0, CurrentValue::new(1e-12).unwrap(), &k).is_err());
    }

    #[test]
    fn bias_for_tau_inverts() {
        let k = PhysicalConstants::default();
        let i = bias_for_tau(1.5e-12, 5e-3, &k).unwrap();
        let tau = tau_from_bias(1.5e-12, i, &k).unwrap();
        assert!(rel(tau, 5e-3) < 1e-14);
    }

    #[test]
    fn constants_validated() {
        assert!(PhysicalConstants::new(0.0, 0.7).is_err());
        assert!(PhysicalConstants::new(0.025, 1.2).is_err());
        assert!(PhysicalConstants::new(0.025, 1.0).is_ok());
        assert!(CurrentValue::new(-1e-12).is_err());
        assert!(CurrentValue::new(f64::NAN).is_err());
        assert!(MismatchModel::new(-0.1, 0).is_err());
    }

    #[test]
    fn mismatch_zero_sigma_identity() {
        let nominal = CurrentValue::new(10e-9).unwrap();
        let m = MismatchModel::new(0.0, 99).unwrap();
        for idx in [0, 1, 17, u64::MAX] {
            assert_eq!(sample_mismatch(nominal, &m, idx), nominal);
        }
    }

    #[test]
    fn mismatch_is_deterministic() {
        let nominal = CurrentValue::new(10e-9).unwrap();
        let m = MismatchModel::new(0.05, 7).unwrap();
        let a = sample_mismatch(nominal, &m, 0);
        let b = sample_mismatch(nominal, &m, 0);
        assert_eq!(a.amps().to_bits(), b.amps().to_bits());
        assert_ne!(a, sample_mismatch(nominal, &m, 1));
    }

    #[test]
    fn mismatch_log_mean_is_zero() {
        // Monte-Carlo oracle over the generator itself.
        let nominal = CurrentValue::new(10e-9).unwrap();
        let m = MismatchModel::new(0.05, 2024).unwrap();
        let n = 100_000u64;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for i in 0..n {
            let g = (sample_mismatch(nominal, &m, i).amps() / nominal.amps()).ln();
            sum += g;
            sum2 += g * g;
        }
        let mean = sum / n as f64;
        let std = (sum2 / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.002, "mean {mean}");
        assert!((std - 0.05).abs() < 0.001, "std {std}");
    }

    proptest! {
        #[test]
        fn decode_monotone_within_coarse(coarse in 0u8..=7, fine in 0u8..127) {
            let lo = decode_bias(BiasCode::new(coarse, fine).unwrap()).unwrap();
            let hi = decode_bias(BiasCode::new(coarse, fine + 1).unwrap()).unwrap();
            prop_assert!(hi.amps() >= lo.amps());
        }

        #[test]
        fn tau_current_product_invariant(cap in 1e-13f64..1e-11, i1 in 1e-13f64..1e-7, i2 in 1e-13f64..1e-7) {
            let k = PhysicalConstants::default();
            let p1 = tau_from_bias(cap, CurrentValue::new(i1).unwrap(), &k).unwrap() * i1;
            let p2 = tau_from_bias(cap, CurrentValue::new(i2).unwrap(), &k).unwrap() * i2;
            prop_assert!(((p1 - p2) / p1).abs() < 1e-14);
        }

        #[test]
        fn reseed_reproduces(seed in any::<u64>(), idx in any::<u64>()) {
            let m = MismatchModel::new(0.05, seed).unwrap();
            prop_assert_eq!(m.factor(idx).to_bits(), m.factor(idx).to_bits());
        }
    }
}
