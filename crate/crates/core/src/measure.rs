//! Measurement apparatus: interferometric time-bin to polarization
//! conversion, polarization projective analysis with coincidence counting,
//! the time-shift attack, and the hybrid polarization/time-bin Bell-state
//! measurement.
//!
//! Wave plates use the Jones convention
//! `HWP(α) = [[cos 2α, sin 2α], [sin 2α, -cos 2α]]` on `(H, V)`, so a plate at
//! α rotates linear polarization by 2α (22.5° takes `H` to `+`).

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::random::{derive_seed, seeded_rng};
use crate::qcore::{
    c, labels, r, tensor, ComplexMatrix, DensityMatrix, PureState, C64, HYBRID_BASIS, I, ONE,
    POLARIZATION_BASIS, TIME_BIN_BASIS, ZERO,
};

/// Separation between adjacent time bins, in nanoseconds.
pub const BIN_SEPARATION_NS: f64 = 0.64;
/// Default coincidence window, in nanoseconds.
pub const DEFAULT_WINDOW_NS: f64 = 1.0;
/// Default attack delay, in nanoseconds.
pub const DEFAULT_ATTACK_DELAY_NS: f64 = 5.0;

/// Single-photon polarization projector labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    L,
    R,
}

impl Pol {
    /// Canonical ordering `(H, V, +, -, L, R)`.
    pub const ALL: [Pol; 6] = [Pol::H, Pol::V, Pol::Plus, Pol::Minus, Pol::L, Pol::R];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&p| p == self).expect("listed")
    }

    /// `L/R = (H ± iV)/√2`, `± = (H ± V)/√2`.
    pub fn amplitudes(self) -> [C64; 2] {
        let s = FRAC_1_SQRT_2;
        match self {
            Pol::H => [ONE, ZERO],
            Pol::V => [ZERO, ONE],
            Pol::Plus => [r(s), r(s)],
            Pol::Minus => [r(s), r(-s)],
            Pol::L => [r(s), c(0.0, s)],
            Pol::R => [r(s), c(0.0, -s)],
        }
    }

    pub fn ket(self) -> PureState {
        PureState::new(self.amplitudes().to_vec(), labels(&["H", "V"])).expect("normalized")
    }

    pub fn projector(self) -> ComplexMatrix {
        self.ket().projector().matrix().clone()
    }

    pub fn axis(self) -> Axis {
        match self {
            Pol::H | Pol::V => Axis::Z,
            Pol::Plus | Pol::Minus => Axis::X,
            Pol::L | Pol::R => Axis::Y,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Pol::H => "H",
            Pol::V => "V",
            Pol::Plus => "+",
            Pol::Minus => "-",
            Pol::L => "L",
            Pol::R => "R",
        }
    }

    pub fn parse(s: &str) -> Option<Pol> {
        Self::ALL.into_iter().find(|p| p.symbol() == s)
    }
}

impl fmt::Display for Pol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Local Pauli measurement axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    Z,
    X,
    Y,
}

impl Axis {
    /// `(+1, -1)` eigenstates.
    pub fn outcomes(self) -> [Pol; 2] {
        match self {
            Axis::Z => [Pol::H, Pol::V],
            Axis::X => [Pol::Plus, Pol::Minus],
            Axis::Y => [Pol::L, Pol::R],
        }
    }
}

/// Basis-selective delay on photon `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub delay_ns: f64,
    pub attacked_settings: BTreeSet<(Pol, Pol)>,
}

impl Default for AttackSpec {
    /// Suppresses `+-`, `-+`, `LL`, `RR`, `HV`, `VH`, which drives the
    /// correlators to `<XX> = 1`, `<YY> = -1`, `<ZZ> = 1`.
    fn default() -> Self {
        let attacked_settings = [
            (Pol::Plus, Pol::Minus),
            (Pol::Minus, Pol::Plus),
            (Pol::L, Pol::L),
            (Pol::R, Pol::R),
            (Pol::H, Pol::V),
            (Pol::V, Pol::H),
        ]
        .into_iter()
        .collect();
        Self { delay_ns: DEFAULT_ATTACK_DELAY_NS, attacked_settings }
    }
}

impl AttackSpec {
    /// Fraction of attacked coincidences still inside a window of the given
    /// width. Zero once the delay reaches the window.
    pub fn surviving_fraction(&self, window_ns: f64) -> f64 {
        if self.delay_ns >= window_ns {
            0.0
        } else {
            ((window_ns - self.delay_ns.max(0.0)) / window_ns).clamp(0.0, 1.0)
        }
    }

    pub fn attacks(&self, outcome: (Pol, Pol)) -> bool {
        self.attacked_settings.contains(&outcome)
    }
}

/// One local-basis configuration. `basis_u`/`basis_v` name the measured
/// bases by any of their projectors (`H` or `V` selects the Z basis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjSetting {
    pub basis_u: Pol,
    pub basis_v: Pol,
    pub shots: u64,
    pub window_ns: f64,
    pub attack: Option<AttackSpec>,
}

impl ProjSetting {
    pub fn new(basis_u: Pol, basis_v: Pol, shots: u64) -> Self {
        Self { basis_u, basis_v, shots, window_ns: DEFAULT_WINDOW_NS, attack: None }
    }

    pub fn with_attack(mut self, attack: Option<AttackSpec>) -> Self {
        self.attack = attack;
        self
    }

    pub fn outcomes(&self) -> [(Pol, Pol); 4] {
        let [a0, a1] = self.basis_u.axis().outcomes();
        let [b0, b1] = self.basis_v.axis().outcomes();
        [(a0, b0), (a0, b1), (a1, b0), (a1, b1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerPhases {
    pub phi_u: f64,
    pub phi_v: f64,
    /// Pump interferometer phase; enters at state generation, not at analysis.
    pub phi_p: f64,
}

impl Default for InterferometerPhases {
    fn default() -> Self {
        Self { phi_u: 0.0, phi_v: 0.0, phi_p: 0.0 }
    }
}

/// Output time bins of an analysis interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeBin {
    Early,
    Middle,
    Late,
}

impl TimeBin {
    pub const ALL: [TimeBin; 3] = [TimeBin::Early, TimeBin::Middle, TimeBin::Late];

    pub fn offset_ns(self) -> f64 {
        match self {
            TimeBin::Early => -BIN_SEPARATION_NS,
            TimeBin::Middle => 0.0,
            TimeBin::Late => BIN_SEPARATION_NS,
        }
    }
}

/// Single-photon map through HWP@22.5° and the analysis interferometer,
/// as a 6x2 matrix from `(e, l)` to `(bin, pol)` rows ordered
/// `E_H, E_V, M_H, M_V, L_H, L_V`. The `H` component takes the short arm,
/// the `V` component the long arm with phase `phi`.
fn analysis_umzi(phi: f64) -> ComplexMatrix {
    let s = FRAC_1_SQRT_2;
    let ph = C64::from_polar(s, phi);
    let mut m = ComplexMatrix::zeros(6, 2);
    m[(0, 0)] = r(s); // e, H, short -> early
    m[(3, 0)] = ph; // e, V, long -> middle
    m[(2, 1)] = r(s); // l, H, short -> middle
    m[(5, 1)] = ph; // l, V, long -> late
    m
}

/// Middle-bin block of [`analysis_umzi`]: `e -> e^{iφ} V/√2`, `l -> H/√2`.
fn middle_bin_kraus(phi: f64) -> ComplexMatrix {
    let full = analysis_umzi(phi);
    let mut k = ComplexMatrix::zeros(2, 2);
    for col in 0..2 {
        k[(0, col)] = full[(2, col)];
        k[(1, col)] = full[(3, col)];
    }
    k
}

/// Converts a two-photon time-bin state to the polarization state heralded
/// by a middle-middle detection. Returns the state and the postselection
/// probability.
pub fn umzi_convert(timebin_rho: &DensityMatrix, phases: &InterferometerPhases) -> Result<(DensityMatrix, f64)> {
    timebin_rho.require_labels(&TIME_BIN_BASIS)?;
    let k = tensor(&middle_bin_kraus(phases.phi_u), &middle_bin_kraus(phases.phi_v));
    let out = &k * timebin_rho.matrix() * k.adjoint();
    let probability = out.trace().re;
    if probability < 1e-12 {
        return Err(Error::NoMiddleBin { probability });
    }
    let pol = DensityMatrix::new(out.scale(1.0 / probability).hermitian_part(), labels(&POLARIZATION_BASIS))?;
    Ok((pol, probability))
}

/// Joint detection probabilities over `(bin_u, bin_v)`, polarization summed.
pub fn time_bin_distribution(timebin_rho: &DensityMatrix, phases: &InterferometerPhases) -> Result<[[f64; 3]; 3]> {
    timebin_rho.require_labels(&TIME_BIN_BASIS)?;
    let k = tensor(&analysis_umzi(phases.phi_u), &analysis_umzi(phases.phi_v));
    let out = &k * timebin_rho.matrix() * k.adjoint();
    let mut p = [[0.0; 3]; 3];
    // row index = 6 * (2 bu + pu) + (2 bv + pv)
    for idx in 0..36 {
        let (iu, iv) = (idx / 6, idx % 6);
        p[iu / 2][iv / 2] += out[(idx, idx)].re;
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin_u: TimeBin,
    pub bin_v: TimeBin,
    pub delay_u_ns: f64,
    pub delay_v_ns: f64,
    pub probability: f64,
}

/// Coincidence probability versus the delays applied to photons u and v.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceMap {
    pub delays_u_ns: Vec<f64>,
    pub delays_v_ns: Vec<f64>,
    /// `counts[i][j]` at `(delays_u[i], delays_v[j])`.
    pub counts: Vec<Vec<f64>>,
    /// Resolved peaks with nonzero weight.
    pub peaks: Vec<Peak>,
    pub gate_ns: f64,
}

impl CoincidenceMap {
    pub fn diagonal_peaks(&self) -> Vec<&Peak> {
        self.peaks.iter().filter(|p| p.bin_u == p.bin_v).collect()
    }

    /// Contiguous nonzero runs along the `i == j` diagonal of the scanned
    /// map, returned as their centre delays (u axis).
    pub fn diagonal_runs(&self) -> Vec<f64> {
        let n = self.delays_u_ns.len().min(self.delays_v_ns.len());
        let mut runs = Vec::new();
        let mut start: Option<usize> = None;
        for i in 0..=n {
            let on = i < n && self.counts[i][i] > 1e-12;
            match (on, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push(0.5 * (self.delays_u_ns[s] + self.delays_u_ns[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        runs
    }
}

/// Scans the relative detection delays of the two photons after the
/// analysis interferometers. A detection contributes to a scan point when
/// it lies within a quarter bin separation of the point.
pub fn delay_scan(timebin_rho: &DensityMatrix, delays_u: &[f64], delays_v: &[f64]) -> Result<CoincidenceMap> {
    delay_scan_with_phases(timebin_rho, delays_u, delays_v, &InterferometerPhases::default())
}

pub fn delay_scan_with_phases(
    timebin_rho: &DensityMatrix,
    delays_u: &[f64],
    delays_v: &[f64],
    phases: &InterferometerPhases,
) -> Result<CoincidenceMap> {
    let dist = time_bin_distribution(timebin_rho, phases)?;
    let gate = BIN_SEPARATION_NS / 4.0;
    let inside = |d: f64, bin: TimeBin| (d - bin.offset_ns()).abs() <= gate;
    let mut counts = vec![vec![0.0; delays_v.len()]; delays_u.len()];
    for (i, &du) in delays_u.iter().enumerate() {
        for (j, &dv) in delays_v.iter().enumerate() {
            for (a, &bu) in TimeBin::ALL.iter().enumerate() {
                for (b, &bv) in TimeBin::ALL.iter().enumerate() {
                    if inside(du, bu) && inside(dv, bv) {
                        counts[i][j] += dist[a][b];
                    }
                }
            }
        }
    }
    let mut peaks = Vec::new();
    for (a, &bu) in TimeBin::ALL.iter().enumerate() {
        for (b, &bv) in TimeBin::ALL.iter().enumerate() {
            if dist[a][b] > 1e-12 {
                peaks.push(Peak {
                    bin_u: bu,
                    bin_v: bv,
                    delay_u_ns: bu.offset_ns(),
                    delay_v_ns: bv.offset_ns(),
                    probability: dist[a][b],
                });
            }
        }
    }
    Ok(CoincidenceMap {
        delays_u_ns: delays_u.to_vec(),
        delays_v_ns: delays_v.to_vec(),
        counts,
        peaks,
        gate_ns: gate,
    })
}

/// Coincidence counts for the four outcome pairs of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub outcomes: [(Pol, Pol); 4],
    pub counts: [u64; 4],
}

impl OutcomeCounts {
    pub fn new(setting_outcomes: [(Pol, Pol); 4], counts: [u64; 4]) -> Self {
        Self { outcomes: setting_outcomes, counts }
    }

    pub fn axes(&self) -> (Axis, Axis) {
        (self.outcomes[0].0.axis(), self.outcomes[0].1.axis())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, outcome: (Pol, Pol)) -> Option<u64> {
        self.outcomes.iter().position(|&o| o == outcome).map(|k| self.counts[k])
    }
}

/// Born-rule outcome probabilities for a setting, in `setting.outcomes()` order.
pub fn born_probabilities(pol_rho: &DensityMatrix, setting: &ProjSetting) -> Result<[f64; 4]> {
    if pol_rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: pol_rho.dim() });
    }
    let mut p = [0.0; 4];
    for (k, (a, b)) in setting.outcomes().into_iter().enumerate() {
        let proj = tensor(&a.projector(), &b.projector());
        p[k] = pol_rho.expectation(&proj)?.max(0.0);
    }
    Ok(p)
}

/// Multinomial sample of `n` trials over `probs` (normalized internally).
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let total: f64 = probs.iter().sum();
    let mut remaining_n = n;
    let mut remaining_p = 1.0;
    let mut out = vec![0; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = remaining_n;
            break;
        }
        let q = if remaining_p > 0.0 { (p / total / remaining_p).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining_n, q).expect("valid binomial").sample(rng);
        out[k] = draw;
        remaining_n -= draw;
        remaining_p -= p / total;
    }
    out
}

/// Samples `setting.shots` coincidences over the four outcome pairs.
/// Outcomes named by an active attack are then suppressed: entirely when
/// the delay reaches the window, otherwise thinned by the surviving window
/// overlap using an independent stream.
pub fn projective_counts(pol_rho: &DensityMatrix, setting: &ProjSetting, seed: u64) -> Result<OutcomeCounts> {
    if setting.shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let probs = born_probabilities(pol_rho, setting)?;
    let mut rng = seeded_rng(seed);
    let sampled = sample_multinomial(&mut rng, setting.shots, &probs);
    let mut counts = [sampled[0], sampled[1], sampled[2], sampled[3]];
    let outcomes = setting.outcomes();
    if let Some(attack) = &setting.attack {
        let keep = attack.surviving_fraction(setting.window_ns);
        let mut thin_rng = seeded_rng(derive_seed(seed, 0xA77A_C4));
        for (k, &o) in outcomes.iter().enumerate() {
            if attack.attacks(o) {
                counts[k] = if keep <= 0.0 {
                    0
                } else {
                    Binomial::new(counts[k], keep).expect("valid").sample(&mut thin_rng)
                };
            }
        }
    }
    Ok(OutcomeCounts::new(outcomes, counts))
}

/// `(C_{++} - C_{+-} - C_{-+} + C_{--}) / ΣC` for the setting's Pauli pair.
pub fn correlator_from_counts(counts: &OutcomeCounts) -> Result<f64> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::ZeroCounts);
    }
    let [a, b, c_, d] = counts.counts.map(|x| x as f64);
    Ok((a - b - c_ + d) / total as f64)
}

/// Poisson-propagated standard error of [`correlator_from_counts`].
pub fn correlator_std_err(counts: &OutcomeCounts) -> Result<f64> {
    let total = counts.total() as f64;
    if total == 0.0 {
        return Err(Error::ZeroCounts);
    }
    let same = (counts.counts[0] + counts.counts[3]) as f64;
    let diff = (counts.counts[1] + counts.counts[2]) as f64;
    Ok((4.0 * same * diff / total.powi(3)).sqrt())
}

/// Hybrid Bell states between the polarization and time-bin of one photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HybridBell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl HybridBell {
    pub const ALL: [HybridBell; 4] =
        [HybridBell::PhiPlus, HybridBell::PhiMinus, HybridBell::PsiPlus, HybridBell::PsiMinus];

    /// Wave-plate angles `(HWP1, HWP2)` in degrees that herald this outcome
    /// on an `|Hm>` detection.
    pub fn waveplate_setting(self) -> (f64, f64) {
        match self {
            HybridBell::PhiPlus => (0.0, 22.5),
            HybridBell::PsiMinus => (45.0, 22.5),
            HybridBell::PhiMinus => (0.0, 67.5),
            HybridBell::PsiPlus => (45.0, 67.5),
        }
    }

    pub fn from_waveplates(hwp1: f64, hwp2: f64) -> Result<HybridBell> {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        Self::ALL
            .into_iter()
            .find(|h| {
                let (a, b) = h.waveplate_setting();
                close(a, hwp1) && close(b, hwp2)
            })
            .ok_or(Error::UnsupportedWaveplates { hwp1, hwp2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellProbabilities {
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub psi_plus: f64,
    pub psi_minus: f64,
}

impl BellProbabilities {
    pub fn get(&self, which: HybridBell) -> f64 {
        match which {
            HybridBell::PhiPlus => self.phi_plus,
            HybridBell::PhiMinus => self.phi_minus,
            HybridBell::PsiPlus => self.psi_plus,
            HybridBell::PsiMinus => self.psi_minus,
        }
    }

    pub fn sum(&self) -> f64 {
        self.phi_plus + self.phi_minus + self.psi_plus + self.psi_minus
    }
}

/// Closed-form Bell projection probabilities: `|a ± d|²/2`, `|b ± c|²/2`.
pub fn bsm_probabilities(chi: &PureState) -> Result<BellProbabilities> {
    if chi.basis_labels().iter().map(String::as_str).ne(HYBRID_BASIS.iter().copied()) {
        return Err(Error::WrongBasis { expected: labels(&HYBRID_BASIS), found: chi.basis_labels().to_vec() });
    }
    let [a, b, c_, d] = [chi.amplitudes()[0], chi.amplitudes()[1], chi.amplitudes()[2], chi.amplitudes()[3]];
    Ok(BellProbabilities {
        phi_plus: (a + d).norm_sqr() / 2.0,
        phi_minus: (a - d).norm_sqr() / 2.0,
        psi_plus: (b + c_).norm_sqr() / 2.0,
        psi_minus: (c_ - b).norm_sqr() / 2.0,
    })
}

/// Half-wave-plate Jones matrix at `angle_deg`.
pub fn hwp(angle_deg: f64) -> [[C64; 2]; 2] {
    let t = 2.0 * angle_deg.to_radians();
    [[r(t.cos()), r(t.sin())], [r(t.sin()), r(-t.cos())]]
}

/// Quarter-wave-plate Jones matrix at `angle_deg` (fast axis at the angle).
pub fn qwp(angle_deg: f64) -> [[C64; 2]; 2] {
    let t = angle_deg.to_radians();
    let (cs, sn) = (t.cos(), t.sin());
    [
        [r(cs * cs) + I * (sn * sn), r(cs * sn) - I * (cs * sn)],
        [r(cs * sn) - I * (cs * sn), r(sn * sn) + I * (cs * cs)],
    ]
}

fn apply_plate(plate: &[[C64; 2]; 2], h: C64, v: C64) -> (C64, C64) {
    (plate[0][0] * h + plate[0][1] * v, plate[1][0] * h + plate[1][1] * v)
}

/// Output amplitudes of the hybrid BSM chain (HWP1, polarization-flipping
/// interferometer, HWP2) for input amplitudes on `[He, Ve, Hl, Vl]`.
/// Rows are `(bin, pol)` ordered `E_H, E_V, M_H, M_V, L_H, L_V`.
///
/// In the interferometer `H` takes the long arm (one bin later, phase
/// `phi_u`) and leaves as `V`; `V` takes the short arm and leaves as `H`.
pub fn bsm_chain_amplitudes(amps: [C64; 4], hwp1_deg: f64, hwp2_deg: f64, phi_u: f64) -> [C64; 6] {
    let p1 = hwp(hwp1_deg);
    let (he, ve) = apply_plate(&p1, amps[0], amps[1]);
    let (hl, vl) = apply_plate(&p1, amps[2], amps[3]);
    let phase = C64::from_polar(1.0, phi_u);
    // (bin index, H, V) after the interferometer
    let mut bins = [(ZERO, ZERO); 3];
    bins[1].1 += phase * he; // H,e -> V,m
    bins[2].1 += phase * hl; // H,l -> V,late
    bins[0].0 += ve; // V,e -> H,early
    bins[1].0 += vl; // V,l -> H,m
    let p2 = hwp(hwp2_deg);
    let mut out = [ZERO; 6];
    for (k, &(h, v)) in bins.iter().enumerate() {
        let (h2, v2) = apply_plate(&p2, h, v);
        out[2 * k] = h2;
        out[2 * k + 1] = v2;
    }
    out
}

/// Probability of the postselected `|Hm>` event for the wave-plate setting.
pub fn bsm_waveplate_model(chi: &PureState, hwp1_deg: f64, hwp2_deg: f64, phi_u: f64) -> Result<f64> {
    HybridBell::from_waveplates(hwp1_deg, hwp2_deg)?;
    if chi.basis_labels().iter().map(String::as_str).ne(HYBRID_BASIS.iter().copied()) {
        return Err(Error::WrongBasis { expected: labels(&HYBRID_BASIS), found: chi.basis_labels().to_vec() });
    }
    let a = chi.amplitudes();
    let out = bsm_chain_amplitudes([a[0], a[1], a[2], a[3]], hwp1_deg, hwp2_deg, phi_u);
    Ok(out[2].norm_sqr())
}

/// POVM element of the `|Hm>` event on the hybrid space `[He, Ve, Hl, Vl]`,
/// derived from the wave-plate chain.
pub fn bsm_povm_element(hwp1_deg: f64, hwp2_deg: f64, phi_u: f64) -> ComplexMatrix {
    // the |Hm> amplitude is linear in the input: amp = Σ_k f_k χ_k
    let mut f = [ZERO; 4];
    for (k, fk) in f.iter_mut().enumerate() {
        let mut e = [ZERO; 4];
        e[k] = ONE;
        *fk = bsm_chain_amplitudes(e, hwp1_deg, hwp2_deg, phi_u)[2];
    }
    let mut m = ComplexMatrix::zeros(4, 4);
    for j in 0..4 {
        for k in 0..4 {
            m[(j, k)] = f[j].conj() * f[k];
        }
    }
    m
}

/// Interferometer phase at which the wave-plate chain realizes the Bell
/// projections.
pub const BSM_PHASE: f64 = PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::fidelity_pure;
    use crate::states::{bell_target, hybrid_bell, hybrid_state, phi_plus};

    fn timebin(label: &str) -> DensityMatrix {
        PureState::from_label(label, labels(&TIME_BIN_BASIS)).unwrap().projector()
    }

    #[test]
    fn converts_bell_state() {
        let rho = phi_plus(&TIME_BIN_BASIS).projector();
        let (pol, p) = umzi_convert(&rho, &InterferometerPhases::default()).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        let target = phi_plus(&POLARIZATION_BASIS);
        assert!((fidelity_pure(&pol, &target).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn early_maps_to_vertical() {
        let (pol, p) = umzi_convert(&timebin("ee"), &InterferometerPhases::default()).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        assert!((pol.matrix()[(3, 3)].re - 1.0).abs() < 1e-15);
        let (pol, p) = umzi_convert(&timebin("ll"), &InterferometerPhases::default()).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        assert!((pol.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phase_lands_on_vv_branch() {
        let rho = phi_plus(&TIME_BIN_BASIS).projector();
        let phases = InterferometerPhases { phi_u: 0.3, phi_v: 0.4, phi_p: 0.0 };
        let (pol, _) = umzi_convert(&rho, &phases).unwrap();
        // <HH|rho|VV> = e^{-i(φu+φv)}/2
        let z = pol.matrix()[(0, 3)];
        assert!((z - C64::from_polar(0.5, -0.7)).norm() < 1e-14);
    }

    #[test]
    fn convert_requires_time_bin_labels() {
        let rho = bell_target().projector();
        assert!(matches!(umzi_convert(&rho, &InterferometerPhases::default()), Err(Error::WrongBasis { .. })));
    }

    #[test]
    fn delay_scan_bell_has_three_diagonal_peaks() {
        let rho = phi_plus(&TIME_BIN_BASIS).projector();
        let grid: Vec<f64> = (-100..=100).map(|k| k as f64 * 0.01).collect();
        let map = delay_scan(&rho, &grid, &grid).unwrap();
        let diag = map.diagonal_peaks();
        assert_eq!(diag.len(), 3);
        let runs = map.diagonal_runs();
        assert_eq!(runs.len(), 3);
        assert!((runs[1] - runs[0] - 0.64).abs() < 1e-9);
        assert!((runs[2] - runs[1] - 0.64).abs() < 1e-9);
        let total: f64 = map.peaks.iter().map(|p| p.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delay_scan_early_state_has_no_late_peak() {
        let grid: Vec<f64> = (-100..=100).map(|k| k as f64 * 0.01).collect();
        let map = delay_scan(&timebin("ee"), &grid, &grid).unwrap();
        let bins: Vec<TimeBin> = map.diagonal_peaks().iter().map(|p| p.bin_u).collect();
        assert_eq!(bins, vec![TimeBin::Early, TimeBin::Middle]);
        assert_eq!(map.diagonal_runs().len(), 2);
    }

    #[test]
    fn born_rule_bell_zz() {
        let pol = phi_plus(&POLARIZATION_BASIS).projector();
        let p = born_probabilities(&pol, &ProjSetting::new(Pol::H, Pol::H, 1)).unwrap();
        for (a, e) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn converted_early_state_all_vv() {
        let (pol, _) = umzi_convert(&timebin("ee"), &InterferometerPhases::default()).unwrap();
        let counts = projective_counts(&pol, &ProjSetting::new(Pol::H, Pol::H, 5000), 1).unwrap();
        assert_eq!(counts.counts, [0, 0, 0, 5000]);
    }

    #[test]
    fn attacked_outcomes_vanish() {
        let pol = phi_plus(&POLARIZATION_BASIS).projector();
        let setting = ProjSetting::new(Pol::Plus, Pol::Plus, 10_000).with_attack(Some(AttackSpec::default()));
        let counts = projective_counts(&pol, &setting, 3).unwrap();
        assert_eq!(counts.get((Pol::Plus, Pol::Minus)), Some(0));
        assert_eq!(counts.get((Pol::Minus, Pol::Plus)), Some(0));
    }

    #[test]
    fn partial_overlap_thins() {
        let attack = AttackSpec { delay_ns: 0.25, ..AttackSpec::default() };
        assert!((attack.surviving_fraction(1.0) - 0.75).abs() < 1e-15);
        assert_eq!(AttackSpec::default().surviving_fraction(1.0), 0.0);
        let pol = DensityMatrix::maximally_mixed(labels(&POLARIZATION_BASIS));
        let setting = ProjSetting::new(Pol::H, Pol::H, 400_000).with_attack(Some(attack));
        let counts = projective_counts(&pol, &setting, 5).unwrap();
        let hv = counts.get((Pol::H, Pol::V)).unwrap() as f64;
        let hh = counts.get((Pol::H, Pol::H)).unwrap() as f64;
        assert!((hv / hh - 0.75).abs() < 0.02);
    }

    #[test]
    fn zero_shots_rejected() {
        let pol = phi_plus(&POLARIZATION_BASIS).projector();
        assert!(projective_counts(&pol, &ProjSetting::new(Pol::H, Pol::H, 0), 1).is_err());
    }

    #[test]
    fn correlator_examples() {
        let s = ProjSetting::new(Pol::Plus, Pol::Plus, 1).outcomes();
        assert_eq!(correlator_from_counts(&OutcomeCounts::new(s, [1000, 0, 0, 1000])).unwrap(), 1.0);
        assert_eq!(correlator_from_counts(&OutcomeCounts::new(s, [0, 1000, 1000, 0])).unwrap(), -1.0);
        assert_eq!(correlator_from_counts(&OutcomeCounts::new(s, [0; 4])), Err(Error::ZeroCounts));
        assert_eq!(correlator_std_err(&OutcomeCounts::new(s, [10, 0, 0, 10])).unwrap(), 0.0);
    }

    #[test]
    fn attacked_early_state_xx_is_one() {
        let (pol, _) = umzi_convert(&timebin("ee"), &InterferometerPhases::default()).unwrap();
        let setting = ProjSetting::new(Pol::Plus, Pol::Plus, 10_000).with_attack(Some(AttackSpec::default()));
        let counts = projective_counts(&pol, &setting, 11).unwrap();
        assert_eq!(correlator_from_counts(&counts).unwrap(), 1.0);
    }

    #[test]
    fn bsm_closed_form_examples() {
        let he = hybrid_state(ONE, ZERO, ZERO, ZERO).unwrap();
        let p = bsm_probabilities(&he).unwrap();
        assert_eq!((p.phi_plus, p.phi_minus, p.psi_plus, p.psi_minus), (0.5, 0.5, 0.0, 0.0));
        let p = bsm_probabilities(&hybrid_bell(HybridBell::PhiPlus)).unwrap();
        assert!((p.phi_plus - 1.0).abs() < 1e-15 && p.phi_minus.abs() < 1e-15);
        let s = FRAC_1_SQRT_2;
        let p = bsm_probabilities(&hybrid_state(ZERO, r(s), r(s), ZERO).unwrap()).unwrap();
        assert!((p.psi_plus - 1.0).abs() < 1e-15 && p.psi_minus.abs() < 1e-15);
        let wrong = Pol::H.ket().tensor(&Pol::V.ket());
        assert!(matches!(bsm_probabilities(&wrong), Err(Error::WrongBasis { .. })));
    }

    #[test]
    fn waveplate_chain_on_bell_states() {
        let phi = hybrid_bell(HybridBell::PhiPlus);
        assert!((bsm_waveplate_model(&phi, 0.0, 22.5, PI).unwrap() - 1.0).abs() < 1e-14);
        assert!(bsm_waveplate_model(&phi, 0.0, 67.5, PI).unwrap().abs() < 1e-14);
        assert!(matches!(
            bsm_waveplate_model(&phi, 10.0, 22.5, PI),
            Err(Error::UnsupportedWaveplates { .. })
        ));
    }

    #[test]
    fn waveplate_settings_map_to_bell_outcomes() {
        for which in HybridBell::ALL {
            let (h1, h2) = which.waveplate_setting();
            for target in HybridBell::ALL {
                let p = bsm_waveplate_model(&hybrid_bell(target), h1, h2, PI).unwrap();
                let expected = if target == which { 1.0 } else { 0.0 };
                assert!((p - expected).abs() < 1e-14, "{which:?} on {target:?}: {p}");
            }
        }
    }

    #[test]
    fn povm_matches_projector() {
        let e = bsm_povm_element(0.0, 22.5, PI);
        let phi = hybrid_bell(HybridBell::PhiPlus).projector();
        assert!(e.max_abs_diff(phi.matrix()) < 1e-14);
    }

    #[test]
    fn waveplates_rotate_as_documented() {
        let h22 = hwp(22.5);
        let (h, v) = apply_plate(&h22, ONE, ZERO);
        assert!((h.re - FRAC_1_SQRT_2).abs() < 1e-15 && (v.re - FRAC_1_SQRT_2).abs() < 1e-15);
        // QWP at 45° turns H into circular polarization
        let (h, v) = apply_plate(&qwp(45.0), ONE, ZERO);
        assert!((h.norm_sqr() - 0.5).abs() < 1e-15 && (v.norm_sqr() - 0.5).abs() < 1e-15);
        assert!(((v / h) - c(0.0, -1.0)).norm() < 1e-14 || ((v / h) - c(0.0, 1.0)).norm() < 1e-14);
    }
}
