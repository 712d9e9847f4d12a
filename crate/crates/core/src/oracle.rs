//! Numerical ground truth: trace-distance entanglement by two independent
//! optimizers, the calibration of the θ family against measured values, and
//! maximum-likelihood state tomography.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::certify::mdi_lower_bound;
use crate::error::{Error, Result};
use crate::measure::{projective_counts, Axis, Pol, ProjSetting};
use crate::optim::{minimize, LbfgsOptions};
use crate::qcore::random::{derive_seed, seeded_rng};
use crate::qcore::{
    labels, partial_transpose, reassemble, tensor, ComplexMatrix, DensityMatrix, Subsystem, C64, POLARIZATION_BASIS,
};
use crate::states::{phi_theta, phi_theta_with_phase, NoiseSpec, ThetaParam};

pub const DEFAULT_TOL: f64 = 1e-5;
pub const MIN_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 100_000;
pub const DEFAULT_TERMS: usize = 16;
pub const DEFAULT_RESTARTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    PptConvex,
    ProductMixture,
}

/// One weighted pure product state `a ⊗ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductComponent {
    pub weight: f64,
    pub a: [C64; 2],
    pub b: [C64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableApprox {
    pub sigma_opt: DensityMatrix,
    pub distance: f64,
    pub method: OracleMethod,
    pub iterations: usize,
    pub converged: bool,
    /// Explicit separable decomposition, when the method produces one.
    pub components: Option<Vec<ProductComponent>>,
}

/// `½ Tr|A|` for Hermitian `A`.
fn half_trace_norm(a: &ComplexMatrix) -> Result<f64> {
    Ok(0.5 * a.hermitian_eigenvalues()?.iter().map(|v| v.abs()).sum::<f64>())
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut tau = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Nearest density matrix in Frobenius norm.
fn project_density(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = x.hermitian_part().hermitian_eigen()?;
    Ok(reassemble(&vecs, &project_simplex(&vals)))
}

/// Eigenvalue soft threshold.
fn soft_threshold(x: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    x.hermitian_part().map_spectrum(|v| v.signum() * (v.abs() - t).max(0.0))
}

fn ptv(x: &ComplexMatrix) -> ComplexMatrix {
    partial_transpose(x, Subsystem::V).expect("4x4 operand")
}

struct AdmmRun {
    sigma: ComplexMatrix,
    iterations: usize,
    converged: bool,
}

/// Splitting for `min ½‖Z‖₁` subject to `Z = ρ - σ`, `σ = A`, `σ^Γ = B`
/// with `A`, `B` density matrices.
fn admm(rho: &ComplexMatrix, start: &ComplexMatrix, residual_tol: f64, max_iter: usize) -> Result<AdmmRun> {
    let zero = ComplexMatrix::zeros(4, 4);
    let mut sigma = start.clone();
    let mut z = rho - &sigma;
    let mut a = sigma.clone();
    let mut b = ptv(&sigma);
    let (mut u1, mut u2, mut u3) = (zero.clone(), zero.clone(), zero);
    let mut mu = 1.0;
    for k in 0..max_iter {
        sigma = (rho - &z - &u1 + &a + &u2 + ptv(&(&b + &u3))).scale(1.0 / 3.0);
        let (z_old, a_old, b_old) = (z.clone(), a.clone(), b.clone());
        z = soft_threshold(&(rho - &sigma - &u1), 0.5 / mu)?;
        a = project_density(&(&sigma - &u2))?;
        let sigma_pt = ptv(&sigma);
        b = project_density(&(&sigma_pt - &u3))?;
        let r1 = &z + &sigma - rho;
        let r2 = &a - &sigma;
        let r3 = &b - &sigma_pt;
        u1 = u1 + &r1;
        u2 = u2 + &r2;
        u3 = u3 + &r3;
        let primal = (r1.frobenius_norm().powi(2) + r2.frobenius_norm().powi(2) + r3.frobenius_norm().powi(2)).sqrt();
        let dual = mu
            * ((&z - &z_old).frobenius_norm().powi(2)
                + (&a - &a_old).frobenius_norm().powi(2)
                + (&b - &b_old).frobenius_norm().powi(2))
            .sqrt();
        if primal < residual_tol && dual < residual_tol {
            return Ok(AdmmRun { sigma: a, iterations: k + 1, converged: true });
        }
        if k > 0 && k % 50 == 0 {
            if primal > 10.0 * dual {
                mu *= 2.0;
                u1 = u1.scale(0.5);
                u2 = u2.scale(0.5);
                u3 = u3.scale(0.5);
            } else if dual > 10.0 * primal {
                mu *= 0.5;
                u1 = u1.scale(2.0);
                u2 = u2.scale(2.0);
                u3 = u3.scale(2.0);
            }
        }
    }
    Ok(AdmmRun { sigma: a, iterations: max_iter, converged: false })
}

/// Mixes in just enough `I/4` to make the partial transpose positive.
fn make_ppt(sigma: &ComplexMatrix) -> Result<ComplexMatrix> {
    let lambda = ptv(sigma).hermitian_part().hermitian_eigenvalues()?[0];
    if lambda >= 0.0 {
        return Ok(sigma.clone());
    }
    let t = -lambda / (0.25 - lambda);
    Ok(sigma.scale(1.0 - t) + ComplexMatrix::identity(4).scale(0.25 * t))
}

fn require_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    Ok(())
}

/// `E_Tr(ρ) = min_σ ½Tr|ρ - σ|` over PPT states, which for two qubits are
/// exactly the separable states. Two runs, one started at `ρ` and one at
/// `I/4`, must agree within `tol` for the result to count as converged.
pub fn trace_distance_entanglement(rho: &DensityMatrix, tol: f64) -> Result<SeparableApprox> {
    require_two_qubit(rho)?;
    if !(tol >= MIN_TOL && tol.is_finite()) {
        return Err(Error::OutOfRange { name: "tol", value: tol, min: MIN_TOL, max: f64::INFINITY });
    }
    let m = rho.matrix();
    let residual_tol = tol * 1e-4;
    let mut best: Option<(f64, ComplexMatrix)> = None;
    let mut distances = Vec::with_capacity(2);
    let mut iterations = 0;
    let mut all_converged = true;
    for start in [m.clone(), ComplexMatrix::identity(4).scale(0.25)] {
        let run = admm(m, &start, residual_tol, MAX_ITERATIONS)?;
        iterations += run.iterations;
        all_converged &= run.converged;
        let sigma = make_ppt(&run.sigma)?;
        let d = half_trace_norm(&(m - &sigma))?;
        distances.push(d);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, sigma));
        }
    }
    let (distance, sigma) = best.expect("two runs");
    let agree = (distances[0] - distances[1]).abs() <= tol;
    Ok(SeparableApprox {
        sigma_opt: DensityMatrix::new(sigma.hermitian_part(), rho.basis_labels().to_vec())?,
        distance,
        method: OracleMethod::PptConvex,
        iterations,
        converged: all_converged && agree,
        components: None,
    })
}

/// [`trace_distance_entanglement`] at the default tolerance, distance only.
pub fn e_tr(rho: &DensityMatrix) -> Result<f64> {
    Ok(trace_distance_entanglement(rho, DEFAULT_TOL)?.distance)
}

const SMOOTHING_SCHEDULE: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8];

/// Parameters per term: `Re a, Im a, Re b, Im b` for two components each.
fn unpack(x: &[f64], k: usize) -> ([C64; 2], [C64; 2]) {
    let p = &x[8 * k..8 * k + 8];
    ([C64::new(p[0], p[1]), C64::new(p[2], p[3])], [C64::new(p[4], p[5]), C64::new(p[6], p[7])])
}

fn product_vector(a: &[C64; 2], b: &[C64; 2]) -> [C64; 4] {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

/// Unnormalized mixture `S = Σ v_k v_k†` and the product vectors.
fn mixture(x: &[f64], terms: usize) -> (ComplexMatrix, Vec<[C64; 4]>) {
    let mut s = ComplexMatrix::zeros(4, 4);
    let mut vs = Vec::with_capacity(terms);
    for k in 0..terms {
        let (a, b) = unpack(x, k);
        let v = product_vector(&a, &b);
        for i in 0..4 {
            for j in 0..4 {
                s[(i, j)] += v[i] * v[j].conj();
            }
        }
        vs.push(v);
    }
    (s, vs)
}

/// Smoothed `½Tr|ρ - S/Tr S|` and its gradient in the real parameters.
fn mixture_objective(x: &[f64], terms: usize, rho: &ComplexMatrix, mu: f64) -> (f64, Vec<f64>) {
    let (s, vs) = mixture(x, terms);
    let t = s.trace().re;
    if !(t > 1e-300) {
        return (f64::INFINITY, vec![0.0; x.len()]);
    }
    let d = rho - &s.scale(1.0 / t);
    let Ok((vals, vecs)) = d.hermitian_part().hermitian_eigen() else {
        return (f64::NAN, vec![0.0; x.len()]);
    };
    let f = 0.5 * vals.iter().map(|l| (l * l + mu * mu).sqrt() - mu).sum::<f64>();
    let dd: Vec<f64> = vals.iter().map(|l| 0.5 * l / (l * l + mu * mu).sqrt()).collect();
    let g_d = reassemble(&vecs, &dd);
    // σ = S/t enters D with a minus sign
    let g_sigma = -g_d;
    let tr_gs = (&g_sigma * &s).trace().re;
    let g_s = (g_sigma - ComplexMatrix::identity(4).scale(tr_gs / t)).scale(1.0 / t);
    let mut grad = vec![0.0; x.len()];
    for (k, v) in vs.iter().enumerate() {
        // gradient wrt (Re v, Im v), packed as a complex number
        let mut gv = [C64::new(0.0, 0.0); 4];
        for (i, gi) in gv.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *gi += g_s[(i, j)] * vj;
            }
            *gi *= 2.0;
        }
        let (a, b) = unpack(x, k);
        let ga = [gv[0] * b[0].conj() + gv[1] * b[1].conj(), gv[2] * b[0].conj() + gv[3] * b[1].conj()];
        let gb = [gv[0] * a[0].conj() + gv[2] * a[1].conj(), gv[1] * a[0].conj() + gv[3] * a[1].conj()];
        let out = &mut grad[8 * k..8 * k + 8];
        out.copy_from_slice(&[ga[0].re, ga[0].im, ga[1].re, ga[1].im, gb[0].re, gb[0].im, gb[1].re, gb[1].im]);
    }
    (f, grad)
}

/// Multi-start local search over explicit mixtures of `n_terms` pure product
/// states. The returned decomposition certifies separability, so the
/// distance is an upper bound on `E_Tr`.
///
/// Restart `r` seeds term `k` from `derive_seed(derive_seed(seed, r), k)`, so
/// runs with more terms extend the starting points of runs with fewer.
pub fn closest_separable_product_mixture(
    rho: &DensityMatrix,
    n_terms: usize,
    restarts: usize,
    seed: u64,
) -> Result<SeparableApprox> {
    require_two_qubit(rho)?;
    if n_terms == 0 || restarts == 0 {
        return Err(Error::InvalidParameter("n_terms and restarts must be positive".into()));
    }
    let m = rho.matrix();
    let opts = LbfgsOptions { memory: 12, max_iter: 3000, grad_tol: 1e-12, f_tol: 1e-15 };
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut iterations = 0;
    for r in 0..restarts {
        let restart_seed = derive_seed(seed, r as u64);
        let mut x = Vec::with_capacity(8 * n_terms);
        for k in 0..n_terms {
            let mut rng = seeded_rng(derive_seed(restart_seed, k as u64));
            x.extend((0..8).map(|_| rng.sample::<f64, _>(StandardNormal)));
        }
        let mut converged = false;
        for &mu in &SMOOTHING_SCHEDULE {
            let res = minimize(|p| mixture_objective(p, n_terms, m, mu), x, &opts);
            iterations += res.iterations;
            converged = res.converged;
            x = res.x;
        }
        let (s, _) = mixture(&x, n_terms);
        let d = half_trace_norm(&(m - &s.scale(1.0 / s.trace().re)))?;
        if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
            best = Some((d, x, converged));
        }
    }
    let (distance, x, converged) = best.expect("at least one restart");
    let (s, _) = mixture(&x, n_terms);
    let t = s.trace().re;
    let components = (0..n_terms)
        .map(|k| {
            let (a, b) = unpack(&x, k);
            let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
            let nb = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
            let safe = |v: C64, n: f64| if n > 0.0 { v / n } else { v };
            ProductComponent {
                weight: (na * nb).powi(2) / t,
                a: [safe(a[0], na), safe(a[1], na)],
                b: [safe(b[0], nb), safe(b[1], nb)],
            }
        })
        .collect();
    Ok(SeparableApprox {
        sigma_opt: DensityMatrix::new(s.scale(1.0 / t).hermitian_part(), rho.basis_labels().to_vec())?,
        distance,
        method: OracleMethod::ProductMixture,
        iterations,
        converged,
        components: Some(components),
    })
}

/// `E_Tr` along the θ family, optionally passed through a noise channel.
pub fn e_tr_theta_curve(thetas: &[f64], noise: Option<&NoiseSpec>) -> Result<Vec<f64>> {
    thetas
        .iter()
        .map(|&theta| {
            let rho = phi_theta(ThetaParam::new(theta)?).projector();
            let rho = match noise {
                Some(spec) => crate::states::apply_noise(&rho, spec)?,
                None => rho,
            };
            e_tr(&rho)
        })
        .collect()
}

/// Noisy θ state `p |Φ(θ,φ)><Φ(θ,φ)| + (1-p) I/4` with a residual phase `φ`
/// between the two branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaCalibration {
    pub theta: f64,
    pub visibility: f64,
    pub phase: f64,
}

impl ThetaCalibration {
    pub fn ideal(theta: f64) -> Self {
        Self { theta, visibility: 1.0, phase: 0.0 }
    }

    pub fn state(&self) -> Result<DensityMatrix> {
        let pure = phi_theta_with_phase(ThetaParam::new(self.theta)?, self.phase).projector();
        pure.mix(&DensityMatrix::maximally_mixed(pure.basis_labels().to_vec()), self.visibility)
    }

    /// Closed-form MDI lower bound of [`Self::state`].
    pub fn lower_bound(&self) -> f64 {
        let fidelity = self.visibility * (1.0 + (2.0 * self.theta).sin() * self.phase.cos()) / 2.0
            + (1.0 - self.visibility) / 4.0;
        mdi_lower_bound(0.25 * (0.5 - fidelity))
    }
}

fn bisect(mut lo: f64, mut hi: f64, mut increasing_above: impl FnMut(f64) -> Result<bool>, tol: f64) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if increasing_above(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fits visibility to the `E_Tr` target (the phase leaves `E_Tr` unchanged),
/// then the phase to the lower-bound target. Targets beyond reach saturate
/// at full visibility or zero phase.
pub fn calibrate_theta(theta: f64, target_lower_bound: f64, target_e_tr: f64) -> Result<ThetaCalibration> {
    ThetaParam::new(theta)?;
    let etr_at = |p: f64| e_tr(&ThetaCalibration { theta, visibility: p, phase: 0.0 }.state()?);
    let visibility = if etr_at(1.0)? <= target_e_tr {
        1.0
    } else {
        bisect(0.0, 1.0, |p| Ok(etr_at(p)? >= target_e_tr), 1e-7)?
    };
    let at_phase = |phase: f64| ThetaCalibration { theta, visibility, phase };
    let phase = if at_phase(0.0).lower_bound() <= target_lower_bound {
        0.0
    } else {
        bisect(0.0, std::f64::consts::PI, |phi| Ok(at_phase(phi).lower_bound() <= target_lower_bound), 1e-10)?
    };
    Ok(at_phase(phase))
}

/// The nine local Pauli basis pairs.
pub fn tomography_settings() -> Vec<(Axis, Axis)> {
    let axes = [Axis::Z, Axis::X, Axis::Y];
    axes.iter().flat_map(|&a| axes.iter().map(move |&b| (a, b))).collect()
}

/// Counts over all 36 projector pairs, `counts[s][t]` for `Pol::ALL[s]` on
/// photon u and `Pol::ALL[t]` on photon v.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyInput {
    pub counts: [[f64; 6]; 6],
    pub total_shots: f64,
}

impl TomographyInput {
    pub fn new(counts: [[f64; 6]; 6]) -> Result<Self> {
        if counts.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidParameter("tomography counts must be finite and nonnegative".into()));
        }
        let total_shots = counts.iter().flatten().sum();
        Ok(Self { counts, total_shots })
    }

    /// Expected counts with `shots` per basis pair.
    pub fn exact(rho: &DensityMatrix, shots: f64) -> Result<Self> {
        require_two_qubit(rho)?;
        let mut counts = [[0.0; 6]; 6];
        for (s, ps) in Pol::ALL.iter().enumerate() {
            for (t, pt) in Pol::ALL.iter().enumerate() {
                let p = rho.expectation(&tensor(&ps.projector(), &pt.projector()))?;
                counts[s][t] = shots * p.max(0.0);
            }
        }
        Self::new(counts)
    }

    /// Multinomial counts with `shots` per basis pair, one derived seed per pair.
    pub fn sample(rho: &DensityMatrix, shots: u64, seed: u64) -> Result<Self> {
        let mut counts = [[0.0; 6]; 6];
        for (k, (au, av)) in tomography_settings().into_iter().enumerate() {
            let setting = ProjSetting::new(au.outcomes()[0], av.outcomes()[0], shots);
            let oc = projective_counts(rho, &setting, derive_seed(seed, k as u64))?;
            for ((pu, pv), n) in oc.outcomes.iter().zip(oc.counts) {
                counts[pu.index()][pv.index()] = n as f64;
            }
        }
        Self::new(counts)
    }
}

/// Lower-triangular `T` from 16 reals: 4 real diagonal entries, then the
/// real and imaginary parts of the 6 strictly lower entries.
fn unpack_t(x: &[f64]) -> ComplexMatrix {
    let mut t = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        t[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = 4;
    for i in 0..4 {
        for j in 0..i {
            t[(i, j)] = C64::new(x[k], x[k + 1]);
            k += 2;
        }
    }
    t
}

/// Maximum-likelihood two-qubit state for the 36-outcome data, with
/// `ρ = T†T / Tr(T†T)` keeping every iterate physical.
pub fn mle_tomography(input: &TomographyInput) -> Result<DensityMatrix> {
    if !(input.total_shots > 0.0) {
        return Err(Error::ZeroCounts);
    }
    let mut projectors = Vec::with_capacity(36);
    for (s, ps) in Pol::ALL.iter().enumerate() {
        for (t, pt) in Pol::ALL.iter().enumerate() {
            let n = input.counts[s][t];
            if n > 0.0 {
                projectors.push((n / input.total_shots, tensor(&ps.projector(), &pt.projector())));
            }
        }
    }
    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let t = unpack_t(x);
        let m = &t.adjoint() * &t;
        let tr = m.trace().re;
        if !(tr > 1e-300) {
            return (f64::INFINITY, vec![0.0; 16]);
        }
        let rho = m.scale(1.0 / tr);
        let mut f = 0.0;
        let mut g = ComplexMatrix::zeros(4, 4);
        for (w, proj) in &projectors {
            let p = (proj * &rho).trace().re;
            if p <= 0.0 {
                return (f64::INFINITY, vec![0.0; 16]);
            }
            f -= w * p.ln();
            g = g + proj.scale(w / p);
        }
        // d(-L)/dM with M = T†T
        let tr_g = (&g * &rho).trace().re;
        let h = (g - ComplexMatrix::identity(4).scale(tr_g)).scale(-1.0 / tr);
        let ht = &h * &t.adjoint();
        let mut grad = vec![0.0; 16];
        for i in 0..4 {
            grad[i] = 2.0 * ht[(i, i)].re;
        }
        let mut k = 4;
        for i in 0..4 {
            for j in 0..i {
                grad[k] = 2.0 * ht[(j, i)].re;
                grad[k + 1] = -2.0 * ht[(j, i)].im;
                k += 2;
            }
        }
        (f, grad)
    };
    let mut x0 = vec![0.0; 16];
    x0[..4].fill(0.5);
    let opts = LbfgsOptions { memory: 16, max_iter: 20_000, grad_tol: 1e-12, f_tol: 1e-13 };
    let res = minimize(objective, x0, &opts);
    let t = unpack_t(&res.x);
    let m = &t.adjoint() * &t;
    let rho = m.scale(1.0 / m.trace().re).hermitian_part();
    DensityMatrix::new(rho, labels(&POLARIZATION_BASIS))
}
