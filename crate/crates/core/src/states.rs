//! State families used across the network and the noise channels that model
//! imperfect preparation and transmission.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    fidelity_pure, labels, r, tensor, ComplexMatrix, DensityMatrix, PureState, C64,
    COMPUTATIONAL_BASIS, HYBRID_BASIS, TIME_BIN_BASIS, ZERO,
};

/// Bias angle of the tunable time-bin state, restricted to `[0, π/4]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ThetaParam(f64);

impl ThetaParam {
    pub fn new(theta: f64) -> Result<Self> {
        // small slack so that π/4 computed as 2α·π/180 is accepted
        if !theta.is_finite() || !(-1e-12..=FRAC_PI_4 + 1e-12).contains(&theta) {
            return Err(Error::OutOfRange { name: "theta", value: theta, min: 0.0, max: FRAC_PI_4 });
        }
        Ok(Self(theta.clamp(0.0, FRAC_PI_4)))
    }

    /// From the pump half-wave-plate angle in degrees (`θ = 2α`).
    pub fn from_hwp_angle_deg(alpha_deg: f64) -> Result<Self> {
        Self::new(2.0 * alpha_deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn hwp_angle_deg(self) -> f64 {
        (self.0 / 2.0).to_degrees()
    }
}

impl TryFrom<f64> for ThetaParam {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThetaParam> for f64 {
    fn from(t: ThetaParam) -> f64 {
        t.0
    }
}

/// The six bias angles of the θ scan: 0, π/20, π/10, 3π/20, π/5, π/4.
pub fn scan_thetas() -> [ThetaParam; 6] {
    let pi = std::f64::consts::PI;
    [0.0, pi / 20.0, pi / 10.0, 3.0 * pi / 20.0, pi / 5.0, pi / 4.0].map(|t| ThetaParam(t))
}

/// `cos θ |ee> + sin θ |ll>` on the two-link time-bin basis.
pub fn phi_theta(theta: ThetaParam) -> PureState {
    phi_theta_with_phase(theta, 0.0)
}

/// `cos θ |ee> + e^{iφ} sin θ |ll>`; `phase` is the residual pump
/// interferometer phase.
pub fn phi_theta_with_phase(theta: ThetaParam, phase: f64) -> PureState {
    let t = theta.radians();
    let amps = vec![r(t.cos()), ZERO, ZERO, C64::from_polar(t.sin(), phase)];
    PureState::new(amps, labels(&TIME_BIN_BASIS)).expect("unit norm by construction")
}

/// `(|00> + |11>)/√2` on the given two-qubit labels.
pub fn phi_plus(basis_labels: &[&str]) -> PureState {
    PureState::new(vec![r(FRAC_1_SQRT_2), ZERO, ZERO, r(FRAC_1_SQRT_2)], labels(basis_labels))
        .expect("unit norm")
}

/// Computational-basis Φ⁺ used as the witness target.
pub fn bell_target() -> PureState {
    phi_plus(&COMPUTATIONAL_BASIS)
}

/// Werner visibility `p = (4F - 1)/3` for a target Φ⁺ fidelity.
pub fn werner_visibility(fidelity: f64) -> Result<f64> {
    if !(0.25..=1.0).contains(&fidelity) {
        return Err(Error::OutOfRange { name: "werner fidelity", value: fidelity, min: 0.25, max: 1.0 });
    }
    Ok((4.0 * fidelity - 1.0) / 3.0)
}

/// `p |Φ⁺><Φ⁺| + (1 - p) I/4` with Φ⁺ fidelity `F`.
pub fn werner(fidelity: f64) -> Result<DensityMatrix> {
    let p = werner_visibility(fidelity)?;
    let phi = bell_target().projector();
    phi.mix(&DensityMatrix::maximally_mixed(labels(&COMPUTATIONAL_BASIS)), p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Global mixing with white noise; strength is the Φ⁺ fidelity the
    /// channel produces on an ideal Φ⁺ input.
    Werner,
    /// Independent phase flip on each qubit; strength 1 removes all coherence.
    Dephasing,
    /// Independent depolarization of each qubit; strength 1 is fully mixed.
    Depolarizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub strength: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, strength: f64) -> Result<Self> {
        let spec = Self { kind, strength };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity() -> Self {
        Self { kind: NoiseKind::Dephasing, strength: 0.0 }
    }

    pub fn werner(fidelity: f64) -> Result<Self> {
        Self::new(NoiseKind::Werner, fidelity)
    }

    pub fn dephasing(strength: f64) -> Result<Self> {
        Self::new(NoiseKind::Dephasing, strength)
    }

    pub fn depolarizing(strength: f64) -> Result<Self> {
        Self::new(NoiseKind::Depolarizing, strength)
    }

    pub fn validate(&self) -> Result<()> {
        let (min, name) = match self.kind {
            NoiseKind::Werner => (0.25, "werner fidelity"),
            NoiseKind::Dephasing => (0.0, "dephasing strength"),
            NoiseKind::Depolarizing => (0.0, "depolarizing strength"),
        };
        if !self.strength.is_finite() || !(min..=1.0).contains(&self.strength) {
            return Err(Error::OutOfRange { name, value: self.strength, min, max: 1.0 });
        }
        Ok(())
    }

    /// True when the channel is the identity map.
    pub fn is_identity(&self) -> bool {
        match self.kind {
            NoiseKind::Werner => self.strength == 1.0,
            _ => self.strength == 0.0,
        }
    }
}

fn single_qubit_kraus(spec: &NoiseSpec) -> Vec<ComplexMatrix> {
    let id = ComplexMatrix::identity(2);
    match spec.kind {
        NoiseKind::Dephasing => {
            let q = spec.strength / 2.0;
            vec![id.scale((1.0 - q).sqrt()), ComplexMatrix::pauli_z().scale(q.sqrt())]
        }
        NoiseKind::Depolarizing => {
            let q = spec.strength;
            vec![
                id.scale((1.0 - 0.75 * q).sqrt()),
                ComplexMatrix::pauli_x().scale((q / 4.0).sqrt()),
                ComplexMatrix::pauli_y().scale((q / 4.0).sqrt()),
                ComplexMatrix::pauli_z().scale((q / 4.0).sqrt()),
            ]
        }
        NoiseKind::Werner => unreachable!("werner is a global channel"),
    }
}

/// Applies the channel to a two-qubit state. Dephasing and depolarizing act
/// independently on each qubit; Werner mixes globally with `I/4`.
pub fn apply_noise(rho: &DensityMatrix, spec: &NoiseSpec) -> Result<DensityMatrix> {
    spec.validate()?;
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    if spec.is_identity() {
        return Ok(rho.clone());
    }
    match spec.kind {
        NoiseKind::Werner => {
            let p = werner_visibility(spec.strength)?;
            rho.mix(&DensityMatrix::maximally_mixed(rho.basis_labels().to_vec()), p)
        }
        _ => {
            let k1 = single_qubit_kraus(spec);
            let kraus: Vec<ComplexMatrix> =
                k1.iter().flat_map(|a| k1.iter().map(move |b| tensor(a, b))).collect();
            rho.apply_kraus(&kraus)
        }
    }
}

/// Finds the channel strength of `kind` that takes `rho` to the target
/// fidelity with `reference`, by bisection.
pub fn calibrate_noise(
    rho: &DensityMatrix,
    reference: &PureState,
    kind: NoiseKind,
    target_fidelity: f64,
) -> Result<NoiseSpec> {
    let fid = |s: f64| -> Result<f64> {
        let spec = NoiseSpec::new(kind, s)?;
        fidelity_pure(&apply_noise(rho, &spec)?, reference)
    };
    // strength parametrization along which fidelity decreases
    let (weak, strong) = match kind {
        NoiseKind::Werner => (1.0, 0.25),
        _ => (0.0, 1.0),
    };
    let f_weak = fid(weak)?;
    let f_strong = fid(strong)?;
    let (lo_f, hi_f) = (f_strong.min(f_weak), f_strong.max(f_weak));
    if target_fidelity < lo_f - 1e-12 || target_fidelity > hi_f + 1e-12 {
        return Err(Error::Calibration(format!(
            "target fidelity {target_fidelity} outside reachable range [{lo_f}, {hi_f}] for {kind:?}"
        )));
    }
    let (mut a, mut b) = (weak, strong);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (fid(mid)? - target_fidelity) * (f_weak - target_fidelity) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if (a - b).abs() < 1e-15 {
            break;
        }
    }
    NoiseSpec::new(kind, 0.5 * (a + b))
}

/// `a|He> + b|Ve> + c|Hl> + d|Vl>` for a single photon.
pub fn hybrid_state(a: C64, b: C64, c_: C64, d: C64) -> Result<PureState> {
    let norm_sq = a.norm_sqr() + b.norm_sqr() + c_.norm_sqr() + d.norm_sqr();
    if (norm_sq - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sq });
    }
    let norm = norm_sq.sqrt();
    PureState::new(vec![a / norm, b / norm, c_ / norm, d / norm], labels(&HYBRID_BASIS))
}

/// Hybrid Bell states `(|He> ± |Vl>)/√2`, `(|Hl> ± |Ve>)/√2`.
pub fn hybrid_bell(which: crate::measure::HybridBell) -> PureState {
    use crate::measure::HybridBell::*;
    let s = r(FRAC_1_SQRT_2);
    let (a, b, cc, d) = match which {
        PhiPlus => (s, ZERO, ZERO, s),
        PhiMinus => (s, ZERO, ZERO, -s),
        PsiPlus => (ZERO, s, s, ZERO),
        PsiMinus => (ZERO, -s, s, ZERO),
    };
    hybrid_state(a, b, cc, d).expect("normalized")
}

/// Uniformly random normalized hybrid amplitudes `(a, b, c, d)`.
pub fn random_hybrid_state<R: rand::Rng + ?Sized>(rng: &mut R) -> PureState {
    let psi = crate::qcore::random::random_pure_state(rng, 4);
    let a = psi.amplitudes();
    hybrid_state(a[0], a[1], a[2], a[3]).expect("normalized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::partial_trace;
    use crate::qcore::Subsystem;
    use std::f64::consts::PI;

    #[test]
    fn theta_endpoints() {
        let zero = phi_theta(ThetaParam::new(0.0).unwrap());
        assert_eq!(zero.amplitudes()[0], r(1.0));
        assert_eq!(zero.amplitudes()[3].norm(), 0.0);
        let max = phi_theta(ThetaParam::new(PI / 4.0).unwrap());
        assert!((max.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((max.amplitudes()[3].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(max.basis_labels()[3], "ll");
    }

    #[test]
    fn theta_pi_over_20() {
        let s = phi_theta(ThetaParam::new(PI / 20.0).unwrap());
        let expected = [(PI / 20.0).cos(), 0.0, 0.0, (PI / 20.0).sin()];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!((a.re - e).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn theta_out_of_range() {
        assert!(ThetaParam::new(-0.1).is_err());
        assert!(ThetaParam::new(PI / 4.0 + 1e-6).is_err());
        assert!(ThetaParam::new(f64::NAN).is_err());
    }

    #[test]
    fn hwp_relation() {
        let expected_deg = [0.0, 4.5, 9.0, 13.5, 18.0, 22.5];
        for (t, deg) in scan_thetas().iter().zip(expected_deg) {
            assert!((t.hwp_angle_deg() - deg).abs() < 1e-12);
            let back = ThetaParam::from_hwp_angle_deg(deg).unwrap();
            assert!((back.radians() - t.radians()).abs() < 1e-14);
        }
    }

    #[test]
    fn werner_endpoints() {
        let w1 = werner(1.0).unwrap();
        assert!(w1.matrix().max_abs_diff(bell_target().projector().matrix()) < 1e-15);
        let w0 = werner(0.25).unwrap();
        assert!(w0.matrix().max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) < 1e-15);
        assert!(werner(0.2).is_err());
        assert!(werner(1.01).is_err());
    }

    #[test]
    fn werner_round_trip() {
        let f = fidelity_pure(&werner(0.9).unwrap(), &bell_target()).unwrap();
        assert!((f - 0.9).abs() < 1e-12);
    }

    #[test]
    fn zero_strength_is_identity() {
        let rho = werner(0.8).unwrap();
        for spec in [NoiseSpec::dephasing(0.0).unwrap(), NoiseSpec::depolarizing(0.0).unwrap(), NoiseSpec::werner(1.0).unwrap()] {
            assert_eq!(apply_noise(&rho, &spec).unwrap(), rho);
        }
    }

    #[test]
    fn full_dephasing_limit() {
        let rho = bell_target().projector();
        let out = apply_noise(&rho, &NoiseSpec::dephasing(1.0).unwrap()).unwrap();
        let expected = ComplexMatrix::from_diagonal(&[r(0.5), ZERO, ZERO, r(0.5)]);
        assert!(out.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn full_depolarizing_is_maximally_mixed() {
        let rho = bell_target().projector();
        let out = apply_noise(&rho, &NoiseSpec::depolarizing(1.0).unwrap()).unwrap();
        assert!(out.matrix().max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) < 1e-15);
    }

    #[test]
    fn dephasing_leaves_marginals() {
        let rho = phi_theta(ThetaParam::new(0.3).unwrap()).projector();
        let out = apply_noise(&rho, &NoiseSpec::dephasing(0.4).unwrap()).unwrap();
        let a = partial_trace(&rho, Subsystem::U).unwrap();
        let b = partial_trace(&out, Subsystem::U).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-14);
    }

    #[test]
    fn fiber_dephasing_calibration() {
        // pre-fiber average 0.90 -> post-fiber average 0.84
        let pre = werner(0.90).unwrap();
        let spec = calibrate_noise(&pre, &bell_target(), NoiseKind::Dephasing, 0.84).unwrap();
        let post = apply_noise(&pre, &spec).unwrap();
        assert!((fidelity_pure(&post, &bell_target()).unwrap() - 0.84).abs() < 1e-9);
        assert!(spec.strength > 0.0 && spec.strength < 1.0);
        assert!(calibrate_noise(&pre, &bell_target(), NoiseKind::Dephasing, 0.3).is_err());
    }

    #[test]
    fn hybrid_examples() {
        let he = hybrid_state(r(1.0), ZERO, ZERO, ZERO).unwrap();
        assert_eq!(he.basis_labels()[0], "He");
        assert_eq!(he.amplitudes()[0], r(1.0));
        let s = FRAC_1_SQRT_2;
        let phi = hybrid_state(r(s), ZERO, ZERO, r(s)).unwrap();
        assert_eq!(phi, hybrid_bell(crate::measure::HybridBell::PhiPlus));
        // (0, 1/√2, -1/√2, 0) = -|Ψ⁻>
        let m = hybrid_state(ZERO, r(s), r(-s), ZERO).unwrap();
        let overlap = hybrid_bell(crate::measure::HybridBell::PsiMinus).inner(&m).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-15);
        assert!((overlap.re + 1.0).abs() < 1e-15);
        assert!(matches!(hybrid_state(r(1.0), r(1.0), ZERO, ZERO), Err(Error::NotNormalized { .. })));
    }
}
