//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use fcqn_core::certify::{
    mdi_witness, mdi_witness_from_bsm, simulate_witness_counts, witness_expectation, witness_from_counts,
};
use fcqn_core::measure::{
    bsm_probabilities, bsm_waveplate_model, delay_scan, umzi_convert, AttackSpec, HybridBell,
    InterferometerPhases, BSM_PHASE,
};
use fcqn_core::network::{build_fcqn, calibrate_links, default_allocation, distribute, standard_channel_pairs};
use fcqn_core::oracle::{
    calibrate_theta, closest_separable_product_mixture, e_tr, mle_tomography, TomographyInput, DEFAULT_RESTARTS,
    DEFAULT_TERMS,
};
use fcqn_core::qcore::random::{derive_seed, random_separable_state, random_two_qubit_state, seeded_rng};
use fcqn_core::qcore::{fidelity_pure, labels, PureState, COMPUTATIONAL_BASIS, TIME_BIN_BASIS};
use fcqn_core::reference::{LINK_MDI_VALUES, THETA_SCAN};
use fcqn_core::source::{car, pgr_from_rates, power_sweep, simulate_counts, SourceParams};
use fcqn_core::states::{bell_target, phi_plus, phi_theta, random_hybrid_state, scan_thetas, werner, NoiseKind};
use fcqn_core::Error;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn witness_exactness() -> Outcome {
    let bell = witness_expectation(&bell_target().projector()).map_err(err)?;
    let ket00 = PureState::from_label("00", labels(&COMPUTATIONAL_BASIS)).map_err(err)?;
    let zero = witness_expectation(&ket00.projector()).map_err(err)?;
    check(
        (bell + 0.5).abs() <= 1e-12 && zero.abs() <= 1e-12,
        format!("<W>(Phi+) = {bell:.3e}, <W>(|00>) = {zero:.3e}"),
    )
}

fn mdi_identity() -> Outcome {
    let mut rng = seeded_rng(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let rho = random_two_qubit_state(&mut rng);
        let i = mdi_witness(&rho).map_err(err)?.i_value;
        let w = witness_expectation(&rho).map_err(err)?;
        worst = worst.max((i - 0.25 * w).abs());
    }
    check(worst <= 1e-10, format!("max |I - Tr[W rho]/4| over 1000 states = {worst:.2e}"))
}

fn attack_reproduction() -> Outcome {
    let start = Instant::now();
    let ee = PureState::from_label("ee", labels(&TIME_BIN_BASIS)).map_err(err)?.projector();
    let (pol, _) = umzi_convert(&ee, &InterferometerPhases::default()).map_err(err)?;
    let attack = AttackSpec::default();
    let attacked = witness_from_counts(&simulate_witness_counts(&pol, 10_000, Some(&attack), 31).map_err(err)?)
        .map_err(err)?;
    let clean = witness_from_counts(&simulate_witness_counts(&pol, 10_000, None, 31).map_err(err)?).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    check(
        (attacked.0 + 0.5).abs() <= 0.005 && clean.0.abs() <= 0.02 && elapsed < 5.0,
        format!(
            "attacked {:.3} ± {:.3}, clean {:+.3} ± {:.3}, {elapsed:.2} s",
            attacked.0, attacked.1, clean.0, clean.1
        ),
    )
}

fn link_certification() -> Outcome {
    let topology = default_allocation();
    let source = phi_plus(&TIME_BIN_BASIS);
    let fidelities: Vec<f64> = LINK_MDI_VALUES.iter().map(|i| 0.5 - 4.0 * i).collect();
    let noise = calibrate_links(&source, NoiseKind::Werner, &fidelities).map_err(err)?;
    let links = distribute(&topology, &source, &noise).map_err(err)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (link, target)) in links.iter().zip(LINK_MDI_VALUES).enumerate() {
        let res = mdi_witness_from_bsm(&link.rho, 1_000_000, derive_seed(404, k as u64)).map_err(err)?;
        let sigmas = -res.i_value / res.std_err;
        ok &= (res.i_value - target).abs() <= 0.003 && res.i_value < 0.0 && sigmas > 10.0;
        parts.push(format!("{:.3} ({:.0}σ)", res.i_value, sigmas));
    }
    check(ok, format!("I per link: {}", parts.join(", ")))
}

fn theta_scan_analytics() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bounds = Vec::new();
    for theta in scan_thetas() {
        let res = mdi_witness(&phi_theta(theta).projector()).map_err(err)?;
        let s = (2.0 * theta.radians()).sin();
        worst = worst.max((res.i_value + s / 8.0).abs()).max((res.lower_bound - s / 32.0).abs());
        bounds.push(res.lower_bound);
    }
    let last = *bounds.last().expect("six points");
    let monotone = bounds.windows(2).all(|w| w[1] > w[0]);
    check(
        worst <= 1e-12 && (last - 0.03125).abs() <= 1e-12 && last > THETA_SCAN[5].lower_bound && monotone,
        format!("max deviation {worst:.1e}, bound(π/4) = {last:.5} > 0.0269, monotone = {monotone}"),
    )
}

fn quantification_bound() -> Outcome {
    let mut rng = seeded_rng(606);
    let mut worst_slack = f64::INFINITY;
    for _ in 0..200 {
        let rho = random_two_qubit_state(&mut rng);
        let i = mdi_witness(&rho).map_err(err)?.i_value;
        worst_slack = worst_slack.min(e_tr(&rho).map_err(err)? + i / 4.0);
    }
    let mut worst_cross: f64 = 0.0;
    for k in 0..20 {
        let rho = random_two_qubit_state(&mut rng);
        let convex = e_tr(&rho).map_err(err)?;
        let pm = closest_separable_product_mixture(&rho, DEFAULT_TERMS, DEFAULT_RESTARTS, derive_seed(607, k))
            .map_err(err)?;
        worst_cross = worst_cross.max((convex - pm.distance).abs());
    }
    let mut worst_sep: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_separable_state(&mut rng, 4);
        worst_sep = worst_sep.max(e_tr(&rho).map_err(err)?);
    }
    check(
        worst_slack >= -1e-4 && worst_cross <= 1e-3 && worst_sep <= 1e-4,
        format!(
            "min E_Tr + I/4 = {worst_slack:.2e}, max |convex - mixture| = {worst_cross:.2e}, max separable E_Tr = {worst_sep:.2e}"
        ),
    )
}

fn theta_table() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, row) in THETA_SCAN.iter().enumerate() {
        let cal = calibrate_theta(row.theta, row.lower_bound, row.e_tr).map_err(err)?;
        let state = cal.state().map_err(err)?;
        let seed = derive_seed(707, k as u64);
        let lb = mdi_witness_from_bsm(&state, 1_000_000, seed).map_err(err)?.lower_bound;
        let (pol, _) = umzi_convert(&state, &InterferometerPhases::default()).map_err(err)?;
        let recon = mle_tomography(&TomographyInput::sample(&pol, 10_000, derive_seed(seed, 1)).map_err(err)?)
            .map_err(err)?;
        let etr = e_tr(&recon).map_err(err)?;
        ok &= (lb - row.lower_bound).abs() <= 0.005 && (etr - row.e_tr).abs() <= 0.02;
        parts.push(format!("({lb:.4}, {etr:.3})"));
    }
    check(ok, format!("(bound, E_Tr) per θ: {}", parts.join(" ")))
}

fn tomography() -> Outcome {
    let exact = mle_tomography(&TomographyInput::exact(&bell_target().projector(), 10_000.0).map_err(err)?)
        .map_err(err)?;
    let f_exact = fidelity_pure(&exact, &bell_target()).map_err(err)?;
    let rho = werner(0.9).map_err(err)?;
    let mut total = 0.0;
    for seed in 0..20 {
        let est = mle_tomography(&TomographyInput::sample(&rho, 10_000, derive_seed(808, seed)).map_err(err)?)
            .map_err(err)?;
        total += fidelity_pure(&est, &bell_target()).map_err(err)?;
    }
    let mean = total / 20.0;
    check(
        f_exact >= 1.0 - 1e-6 && (mean - 0.90).abs() <= 0.01,
        format!("exact-data infidelity {:.1e}, mean sampled fidelity {mean:.4}", (1.0 - f_exact).max(0.0)),
    )
}

fn measurement_equivalence() -> Outcome {
    let mut rng = seeded_rng(909);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let chi = random_hybrid_state(&mut rng);
        let closed = bsm_probabilities(&chi).map_err(err)?;
        for which in HybridBell::ALL {
            let (h1, h2) = which.waveplate_setting();
            let chain = bsm_waveplate_model(&chi, h1, h2, BSM_PHASE).map_err(err)?;
            worst = worst.max((chain - closed.get(which)).abs());
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bell = |a: f64, b: f64, c: f64, d: f64| {
        PureState::new([a, b, c, d].map(|x| fcqn_core::qcore::r(x * s)).to_vec(), labels(&TIME_BIN_BASIS))
    };
    let mut worst_p: f64 = 0.0;
    for psi in [bell(1.0, 0.0, 0.0, 1.0), bell(1.0, 0.0, 0.0, -1.0), bell(0.0, 1.0, 1.0, 0.0), bell(0.0, 1.0, -1.0, 0.0)]
    {
        let (_, p) = umzi_convert(&psi.map_err(err)?.projector(), &InterferometerPhases::default()).map_err(err)?;
        worst_p = worst_p.max((p - 0.25).abs());
    }
    let grid: Vec<f64> = (-120..=120).map(|k| k as f64 * 0.01).collect();
    let map = delay_scan(&phi_plus(&TIME_BIN_BASIS).projector(), &grid, &grid).map_err(err)?;
    let runs = map.diagonal_runs();
    let spacing_ok = runs.len() == 3 && runs.windows(2).all(|w| (w[1] - w[0] - 0.64).abs() < 1e-9);
    check(
        worst <= 1e-10 && worst_p <= 1e-12 && spacing_ok,
        format!(
            "max BSM deviation {worst:.1e}, max |p - 1/4| {worst_p:.1e}, diagonal peaks at {:?} ns",
            runs.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn network_allocation() -> Outcome {
    let t = default_allocation();
    let expected = [
        ("Alice", ["i1", "i4", "s6"]),
        ("Bob", ["i2", "s4", "s5"]),
        ("Chloe", ["s2", "i3", "i6"]),
        ("David", ["s1", "s3", "i5"]),
    ];
    let sets_ok = expected.iter().all(|(u, set)| t.channels_of(u).as_deref() == Some(&set.map(String::from)[..]));
    let mut builds_ok = true;
    let mut errors_ok = true;
    for n in 2..=6usize {
        let users: Vec<String> = (0..n).map(|k| format!("user{k}")).collect();
        let needed = n * (n - 1) / 2;
        builds_ok &= build_fcqn(&users, &standard_channel_pairs(needed)).and_then(|t| t.validate()).is_ok();
        if needed > 1 {
            errors_ok &= matches!(
                build_fcqn(&users, &standard_channel_pairs(needed - 1)),
                Err(Error::InsufficientChannelPairs { needed: nd, available: av, .. }) if nd == needed && av == needed - 1
            );
        }
    }
    check(
        sets_ok && t.validate().is_ok() && builds_ok && errors_ok,
        format!("per-user sets {sets_ok}, builds n=2..6 {builds_ok}, shortfall errors {errors_ok}"),
    )
}

fn source_statistics() -> Outcome {
    let arithmetic = pgr_from_rates(1e5, 1e5, 1e3).map_err(err)?;
    let params = SourceParams::default();
    let mut min_car = f64::INFINITY;
    for j in 0..params.slopes_mhz_per_mw.len() {
        let rec = simulate_counts(&params, j, 1.0, derive_seed(1111, j as u64)).map_err(err)?;
        min_car = min_car.min(car(&rec).map_err(err)?);
    }
    let powers: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
    let mut monotone = true;
    for j in 0..params.slopes_mhz_per_mw.len() {
        let expected: Vec<f64> =
            powers.iter().map(|&p| params.with_power(p).expected_car(j)).collect::<Result<_, _>>().map_err(err)?;
        let sampled: Vec<f64> = power_sweep(&params, j, &powers, 1.0, derive_seed(1112, j as u64))
            .map_err(err)?
            .iter()
            .map(car)
            .collect::<Result<_, _>>()
            .map_err(err)?;
        monotone &= expected.windows(2).all(|w| w[1] < w[0]) && sampled.windows(2).all(|w| w[1] < w[0]);
    }
    check(
        arithmetic == 1e7 && min_car > 20.0 && monotone,
        format!("PGR example {arithmetic:e} Hz, min CAR at 0.1 mW {min_car:.1}, CAR falls with power {monotone}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("witness exactness", witness_exactness),
        ("MDI and conventional witness identity", mdi_identity),
        ("time-shift attack reproduction", attack_reproduction),
        ("link certification", link_certification),
        ("theta-scan analytics", theta_scan_analytics),
        ("quantification bound validity", quantification_bound),
        ("theta-scan table reproduction", theta_table),
        ("tomography", tomography),
        ("measurement equivalence", measurement_equivalence),
        ("network allocation", network_allocation),
        ("source statistics", source_statistics),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
