//! Entanglement certification: the fidelity witness, its measurement-device-
//! independent (MDI) counterpart, and the trace-distance lower bound that the
//! MDI value implies.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{
    bsm_povm_element, correlator_from_counts, correlator_std_err, projective_counts, AttackSpec, Axis,
    HybridBell, OutcomeCounts, Pol, ProjSetting, BSM_PHASE,
};
use crate::qcore::random::{derive_seed, seeded_rng};
use crate::qcore::{permute_qubits, r, tensor, tensor_all, ComplexMatrix, DensityMatrix};

/// Trace norm of the witness (and of its transpose).
pub const WITNESS_TRACE_NORM: f64 = 2.0;

/// `W = I/2 - |Φ+><Φ+|`.
pub fn witness_operator() -> ComplexMatrix {
    let mut w = ComplexMatrix::identity(4).scale(0.5);
    for &i in &[0, 3] {
        for &j in &[0, 3] {
            w[(i, j)] -= r(0.5);
        }
    }
    w
}

/// `W = (II - XX + YY - ZZ)/4`.
pub fn witness_operator_pauli() -> ComplexMatrix {
    let (x, y, z) = (ComplexMatrix::pauli_x(), ComplexMatrix::pauli_y(), ComplexMatrix::pauli_z());
    (ComplexMatrix::identity(4) - tensor(&x, &x) + tensor(&y, &y) - tensor(&z, &z)).scale(0.25)
}

fn require_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    Ok(())
}

/// `Tr[W ρ] = 1/2 - F`, with `F` the Φ+ fidelity.
pub fn witness_expectation(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubit(rho)?;
    rho.expectation(&witness_operator())
}

/// Witness value and standard error from the XX, YY and ZZ settings.
pub fn witness_from_counts(counts: &[OutcomeCounts]) -> Result<(f64, f64)> {
    let find = |axis: Axis| -> Result<&OutcomeCounts> {
        counts
            .iter()
            .find(|c| c.axes() == (axis, axis))
            .ok_or_else(|| Error::MissingSetting(format!("{axis:?}{axis:?}")))
    };
    let (xx, yy, zz) = (find(Axis::X)?, find(Axis::Y)?, find(Axis::Z)?);
    let value = 0.25
        * (1.0 - correlator_from_counts(xx)? + correlator_from_counts(yy)? - correlator_from_counts(zz)?);
    let var: f64 = [xx, yy, zz].iter().map(|c| correlator_std_err(c).map(|e| e * e)).sum::<Result<f64>>()?;
    Ok((value, 0.25 * var.sqrt()))
}

/// Samples the three correlator settings on a polarization state. Each
/// setting draws from its own derived seed.
pub fn simulate_witness_counts(
    pol_rho: &DensityMatrix,
    shots: u64,
    attack: Option<&AttackSpec>,
    seed: u64,
) -> Result<Vec<OutcomeCounts>> {
    [Pol::Plus, Pol::L, Pol::H]
        .into_iter()
        .enumerate()
        .map(|(k, basis)| {
            let setting = ProjSetting::new(basis, basis, shots).with_attack(attack.cloned());
            projective_counts(pol_rho, &setting, derive_seed(seed, k as u64))
        })
        .collect()
}

/// Trusted-input decomposition `W = Σ β_{s,t} τ_sᵀ ⊗ ω_tᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessDecomposition {
    pub labels: [Pol; 6],
    pub inputs: Vec<DensityMatrix>,
    pub beta: [[f64; 6]; 6],
}

impl WitnessDecomposition {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut w = ComplexMatrix::zeros(4, 4);
        for (s, row) in self.beta.iter().enumerate() {
            for (t, &b) in row.iter().enumerate() {
                if b != 0.0 {
                    let term = tensor(&self.inputs[s].matrix().transpose(), &self.inputs[t].matrix().transpose());
                    w = w + term.scale(b);
                }
            }
        }
        w
    }

    /// Nonzero terms as `(τ, ω, β)` in row-major order.
    pub fn terms(&self) -> Vec<(Pol, Pol, f64)> {
        let mut out = Vec::new();
        for (s, row) in self.beta.iter().enumerate() {
            for (t, &b) in row.iter().enumerate() {
                if b != 0.0 {
                    out.push((self.labels[s], self.labels[t], b));
                }
            }
        }
        out
    }
}

pub fn mdi_decomposition() -> WitnessDecomposition {
    let labels = Pol::ALL;
    let inputs = labels.iter().map(|p| p.ket().projector()).collect();
    let mut beta = [[0.0; 6]; 6];
    let mut set = |a: Pol, b: Pol, v: f64| beta[a.index()][b.index()] = v;
    set(Pol::H, Pol::V, 0.5);
    set(Pol::V, Pol::H, 0.5);
    set(Pol::Plus, Pol::Minus, 0.5);
    set(Pol::Minus, Pol::Plus, 0.5);
    set(Pol::L, Pol::R, -0.5);
    set(Pol::R, Pol::L, -0.5);
    WitnessDecomposition { labels, inputs, beta }
}

/// `P(1,1|τ,ω) = Tr[(τᵀ ⊗ ωᵀ) ρ] / 4`.
pub fn mdi_probability(rho: &DensityMatrix, tau: &DensityMatrix, omega: &DensityMatrix) -> Result<f64> {
    require_two_qubit(rho)?;
    for m in [tau, omega] {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: m.dim() });
        }
    }
    let op = tensor(&tau.matrix().transpose(), &omega.matrix().transpose());
    Ok(0.25 * rho.expectation(&op)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdiTerm {
    pub tau: Pol,
    pub omega: Pol,
    pub beta: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdiResult {
    pub i_value: f64,
    pub terms: Vec<MdiTerm>,
    pub lower_bound: f64,
    pub std_err: f64,
}

/// `max(0, -I / (2 ‖Wᵀ‖₁))`.
pub fn mdi_lower_bound(i_value: f64) -> f64 {
    (-i_value / (2.0 * WITNESS_TRACE_NORM)).max(0.0)
}

/// Exact MDI witness value from the six nonzero decomposition terms.
pub fn mdi_witness(rho: &DensityMatrix) -> Result<MdiResult> {
    require_two_qubit(rho)?;
    let dec = mdi_decomposition();
    let mut terms = Vec::with_capacity(6);
    let mut i_value = 0.0;
    for (tau, omega, beta) in dec.terms() {
        let p = mdi_probability(rho, &dec.inputs[tau.index()], &dec.inputs[omega.index()])?;
        i_value += beta * p;
        terms.push(MdiTerm { tau, omega, beta, probability: p });
    }
    Ok(MdiResult { i_value, terms, lower_bound: mdi_lower_bound(i_value), std_err: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdiOptions {
    /// Weight moved from each trusted input onto its orthogonal partner.
    pub input_infidelity: f64,
}

impl Default for MdiOptions {
    fn default() -> Self {
        Self { input_infidelity: 0.0 }
    }
}

fn partner(p: Pol) -> Pol {
    match p {
        Pol::H => Pol::V,
        Pol::V => Pol::H,
        Pol::Plus => Pol::Minus,
        Pol::Minus => Pol::Plus,
        Pol::L => Pol::R,
        Pol::R => Pol::L,
    }
}

fn trusted_input(p: Pol, infidelity: f64) -> ComplexMatrix {
    p.projector().scale(1.0 - infidelity) + partner(p).projector().scale(infidelity)
}

/// Probability that both photons herald Φ+ in the hybrid Bell-state
/// measurement, for trusted inputs `τ`, `ω` and shared time-bin state `ρ`.
pub fn bsm_success_probability(rho: &DensityMatrix, tau: &ComplexMatrix, omega: &ComplexMatrix) -> Result<f64> {
    require_two_qubit(rho)?;
    // factors (pol_u, tb_u, tb_v, pol_v) -> per-photon (tb, pol)
    let joint = tensor_all([tau, rho.matrix(), omega]);
    let joint = permute_qubits(&joint, &[1, 0, 2, 3])?;
    let (h1, h2) = HybridBell::PhiPlus.waveplate_setting();
    let e = bsm_povm_element(h1, h2, BSM_PHASE);
    let op = tensor(&e, &e);
    let p = (&op * &joint).trace().re;
    Ok(p.clamp(0.0, 1.0))
}

/// Sampled MDI witness through the full hybrid BSM pipeline.
pub fn mdi_witness_from_bsm(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<MdiResult> {
    mdi_witness_from_bsm_with(rho, shots, seed, &MdiOptions::default())
}

pub fn mdi_witness_from_bsm_with(rho: &DensityMatrix, shots: u64, seed: u64, opts: &MdiOptions) -> Result<MdiResult> {
    require_two_qubit(rho)?;
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    if !(0.0..=1.0).contains(&opts.input_infidelity) {
        return Err(Error::OutOfRange { name: "input_infidelity", value: opts.input_infidelity, min: 0.0, max: 1.0 });
    }
    let dec = mdi_decomposition();
    let mut terms = Vec::with_capacity(6);
    let (mut i_value, mut var) = (0.0, 0.0);
    for (k, (tau, omega, beta)) in dec.terms().into_iter().enumerate() {
        let p = bsm_success_probability(
            rho,
            &trusted_input(tau, opts.input_infidelity),
            &trusted_input(omega, opts.input_infidelity),
        )?;
        let mut rng = seeded_rng(derive_seed(seed, k as u64));
        let hits = Binomial::new(shots, p).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(&mut rng);
        let est = hits as f64 / shots as f64;
        i_value += beta * est;
        var += beta * beta * est * (1.0 - est) / shots as f64;
        terms.push(MdiTerm { tau, omega, beta, probability: est });
    }
    Ok(MdiResult { i_value, terms, lower_bound: mdi_lower_bound(i_value), std_err: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{umzi_convert, InterferometerPhases};
    use crate::qcore::random::{random_separable_state, random_two_qubit_state};
    use crate::qcore::{labels, PureState, COMPUTATIONAL_BASIS, POLARIZATION_BASIS, TIME_BIN_BASIS};
    use crate::states::{bell_target, phi_plus, phi_theta, werner, ThetaParam};

    fn ket00() -> DensityMatrix {
        PureState::from_label("00", labels(&COMPUTATIONAL_BASIS)).unwrap().projector()
    }

    #[test]
    fn witness_forms_agree() {
        assert!(witness_operator().max_abs_diff(&witness_operator_pauli()) < 1e-14);
        let ev = witness_operator().hermitian_eigenvalues().unwrap();
        for (a, e) in ev.iter().zip([-0.5, 0.5, 0.5, 0.5]) {
            assert!((a - e).abs() < 1e-14);
        }
        assert!((witness_operator().trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn witness_examples() {
        assert!((witness_expectation(&bell_target().projector()).unwrap() + 0.5).abs() < 1e-12);
        assert!(witness_expectation(&ket00()).unwrap().abs() < 1e-12);
        assert!((witness_expectation(&werner(0.9).unwrap()).unwrap() + 0.4).abs() < 1e-12);
        let one = DensityMatrix::maximally_mixed(labels(&["0", "1"]));
        assert!(matches!(witness_expectation(&one), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn decomposition_reconstructs_witness() {
        let dec = mdi_decomposition();
        assert!(dec.reconstruct().max_abs_diff(&witness_operator()) < 1e-12);
        assert_eq!(dec.terms().len(), 6);
        assert_eq!(dec.beta[Pol::L.index()][Pol::R.index()], -0.5);
        assert!(dec.terms().iter().all(|t| t.2.abs() == 0.5));
    }

    #[test]
    fn probability_examples() {
        let h = Pol::H.ket().projector();
        let v = Pol::V.ket().projector();
        let p = mdi_probability(&bell_target().projector(), &h, &h).unwrap();
        assert!((p - 0.125).abs() < 1e-12);
        assert!(mdi_probability(&ket00(), &v, &h).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mdi_examples() {
        let res = mdi_witness(&bell_target().projector()).unwrap();
        assert!((res.i_value + 0.125).abs() < 1e-12);
        assert!((res.lower_bound - 0.03125).abs() < 1e-12);
        let res = mdi_witness(&ket00()).unwrap();
        assert!(res.i_value.abs() < 1e-12 && res.lower_bound == 0.0);
        let res = mdi_witness(&werner(0.944).unwrap()).unwrap();
        assert!((res.i_value + 0.111).abs() < 1e-12);
    }

    #[test]
    fn mdi_matches_quarter_witness() {
        let mut rng = crate::qcore::random::seeded_rng(17);
        for _ in 0..200 {
            let rho = random_two_qubit_state(&mut rng);
            let i = mdi_witness(&rho).unwrap().i_value;
            assert!((i - 0.25 * witness_expectation(&rho).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn separable_states_never_violate() {
        let mut rng = crate::qcore::random::seeded_rng(23);
        for _ in 0..100 {
            let rho = random_separable_state(&mut rng, 4);
            assert!(mdi_witness(&rho).unwrap().i_value >= -1e-10);
        }
    }

    #[test]
    fn theta_curve_closed_form() {
        for theta in crate::states::scan_thetas() {
            let rho = phi_theta(theta).projector();
            let res = mdi_witness(&rho).unwrap();
            let s = (2.0 * theta.radians()).sin();
            assert!((res.i_value + s / 8.0).abs() < 1e-12);
            assert!((res.lower_bound - s / 32.0).abs() < 1e-12);
        }
        let _ = ThetaParam::new(0.0).unwrap();
    }

    #[test]
    fn bsm_probability_matches_analytic() {
        let mut rng = crate::qcore::random::seeded_rng(5);
        let dec = mdi_decomposition();
        for _ in 0..20 {
            let rho = random_two_qubit_state(&mut rng);
            for (tau, omega, _) in dec.terms() {
                let a = bsm_success_probability(&rho, &tau.projector(), &omega.projector()).unwrap();
                let b = mdi_probability(&rho, &dec.inputs[tau.index()], &dec.inputs[omega.index()]).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_pipeline_recovers_ideal() {
        let rho = phi_plus(&TIME_BIN_BASIS).projector();
        let res = mdi_witness_from_bsm(&rho, 1_000_000, 9).unwrap();
        assert!((res.i_value + 0.125).abs() < 3.0 * res.std_err + 1e-12, "{res:?}");
        assert!(res.std_err > 0.0 && res.std_err < 1e-3);
        let again = mdi_witness_from_bsm(&rho, 1_000_000, 9).unwrap();
        assert_eq!(res, again);
    }

    #[test]
    fn input_infidelity_weakens_violation() {
        let rho = phi_plus(&TIME_BIN_BASIS).projector();
        let opts = MdiOptions { input_infidelity: 0.1 };
        let res = mdi_witness_from_bsm_with(&rho, 1_000_000, 2, &opts).unwrap();
        let dec = mdi_decomposition();
        let mut exact = 0.0;
        for (tau, omega, beta) in dec.terms() {
            let t = DensityMatrix::from_matrix(trusted_input(tau, 0.1)).unwrap();
            let o = DensityMatrix::from_matrix(trusted_input(omega, 0.1)).unwrap();
            exact += beta * mdi_probability(&rho, &t, &o).unwrap();
        }
        assert!(exact > -0.125 + 0.01);
        assert!((res.i_value - exact).abs() < 4.0 * res.std_err);
        assert!(mdi_witness_from_bsm(&rho, 0, 1).is_err());
    }

    #[test]
    fn counts_witness_on_bell_and_attack() {
        let pol = phi_plus(&POLARIZATION_BASIS).projector();
        let counts = simulate_witness_counts(&pol, 10_000, None, 4).unwrap();
        let (w, e) = witness_from_counts(&counts).unwrap();
        assert!((w + 0.5).abs() <= 3.0 * e + 1e-12);

        let ee = PureState::from_label("ee", labels(&TIME_BIN_BASIS)).unwrap().projector();
        let (pol, _) = umzi_convert(&ee, &InterferometerPhases::default()).unwrap();
        let attacked = simulate_witness_counts(&pol, 10_000, Some(&AttackSpec::default()), 4).unwrap();
        let (w, e) = witness_from_counts(&attacked).unwrap();
        assert_eq!((w, e), (-0.5, 0.0));
        assert!(witness_from_counts(&attacked[..2]).is_err());
    }
}
