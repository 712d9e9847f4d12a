//! Scenario runners. Each turns a resolved configuration into tables and
//! plot data; nothing here touches the filesystem.

use fcqn_core::certify::{
    mdi_witness, mdi_witness_from_bsm, simulate_witness_counts, witness_expectation, witness_from_counts,
};
use fcqn_core::measure::{projective_counts, umzi_convert, InterferometerPhases, Pol, ProjSetting};
use fcqn_core::network::{distribute, standard_channel_pairs, LinkState, NetworkTopology};
use fcqn_core::oracle::{calibrate_theta, e_tr, mle_tomography, ThetaCalibration, TomographyInput};
use fcqn_core::qcore::random::derive_seed;
use fcqn_core::qcore::{fidelity_pure, labels, DensityMatrix, PureState, POLARIZATION_BASIS, TIME_BIN_BASIS};
use fcqn_core::reference::{
    ATTACK_WITNESS_ATTACKED, ATTACK_WITNESS_CLEAN, LINK_MDI_VALUES, THETA_SCAN, USER_PAIR_ORDER,
};
use fcqn_core::source::{car, pgr, power_sweep};
use fcqn_core::states::{bell_target, phi_plus, phi_theta, ThetaParam};
use fcqn_core::Result;

use crate::config::{ExperimentConfig, Scenario, SourceState};
use crate::report::{Cell, Outputs, Table};

pub fn run(config: &ExperimentConfig) -> Result<Outputs> {
    match config.scenario {
        Scenario::SourceSweep => source_sweep(config),
        Scenario::Tomography => tomography(config),
        Scenario::Witness => witness(config),
        Scenario::Attack => attack(config),
        Scenario::Mdi => mdi(config),
        Scenario::ThetaScan => theta_scan(config),
        Scenario::Allocate => Ok(allocate(&config.topology)),
    }
}

fn source_state(state: SourceState) -> Result<PureState> {
    match state {
        SourceState::PhiPlus => Ok(phi_plus(&TIME_BIN_BASIS)),
        SourceState::Basis(k) => PureState::basis(k, labels(&TIME_BIN_BASIS)),
    }
}

fn links(config: &ExperimentConfig) -> Result<Vec<LinkState>> {
    distribute(&config.topology, &source_state(config.state)?, &config.noise)
}

/// Link indices ordered by user pair, following the order users are listed.
fn by_user_pair(topology: &NetworkTopology) -> Vec<usize> {
    let rank = |u: &str| topology.users.iter().position(|x| x == u).unwrap_or(usize::MAX);
    let mut order: Vec<usize> = (0..topology.link_count()).collect();
    order.sort_by_key(|&j| {
        let (a, b) = &topology.link_map[j];
        let (ra, rb) = (rank(a), rank(b));
        (ra.min(rb), ra.max(rb))
    });
    order
}

/// `A-B` with the earlier-listed user first.
fn pair_label(topology: &NetworkTopology, j: usize) -> String {
    let (a, b) = &topology.link_map[j];
    let rank = |u: &str| topology.users.iter().position(|x| x == u);
    if rank(a) <= rank(b) {
        format!("{a}-{b}")
    } else {
        format!("{b}-{a}")
    }
}

/// Position of the link's users in the reference user-pair order, when the
/// topology uses the reference users.
fn reference_index(topology: &NetworkTopology, j: usize) -> Option<usize> {
    let (a, b) = &topology.link_map[j];
    USER_PAIR_ORDER.iter().position(|(x, y)| (x == a && y == b) || (x == b && y == a))
}

fn polarization(rho: &DensityMatrix) -> Result<DensityMatrix> {
    Ok(umzi_convert(rho, &InterferometerPhases::default())?.0)
}

fn source_sweep(config: &ExperimentConfig) -> Result<Outputs> {
    let sweep = &config.source;
    let n = sweep.params.slopes_mhz_per_mw.len();
    let pairs = standard_channel_pairs(n);
    let mut table = Table::new(
        "source_sweep",
        &[
            ("pair", ""),
            ("signal", ""),
            ("idler", ""),
            ("pump_power", "mW"),
            ("n_s", "1/s"),
            ("n_i", "1/s"),
            ("n_c", "1/s"),
            ("pgr", "MHz"),
            ("pgr_expected", "MHz"),
            ("car", ""),
            ("car_expected", ""),
        ],
    );
    let mut histogram = Table::new("histogram", &[("pair", ""), ("pump_power", "mW"), ("delay", "ns"), ("counts", "")]);
    for j in 0..n {
        let records = power_sweep(&sweep.params, j, &sweep.pump_powers_mw, sweep.duration_s, derive_seed(config.seed, j as u64))?;
        for rec in &records {
            let params = sweep.params.with_power(rec.pump_power_mw);
            table.push(vec![
                (j + 1).into(),
                pairs[j].signal.label.as_str().into(),
                pairs[j].idler.label.as_str().into(),
                rec.pump_power_mw.into(),
                rec.n_s.into(),
                rec.n_i.into(),
                rec.n_c.into(),
                pgr(rec).ok().map(|r| r / 1e6).into(),
                (params.pair_rate_hz(j)? / 1e6).into(),
                car(rec).ok().into(),
                params.expected_car(j).ok().into(),
            ]);
            for bin in &rec.histogram {
                histogram.push(vec![
                    (j + 1).into(),
                    rec.pump_power_mw.into(),
                    bin.delay_ns.into(),
                    bin.counts.into(),
                ]);
            }
        }
    }
    let mut rates = Table::new("pair_rate", &[("pair", ""), ("pump_power", "mW"), ("pgr", "MHz")]);
    let (kp, kr) = (table.column_index("pump_power").unwrap(), table.column_index("pgr").unwrap());
    for row in &table.rows {
        rates.push(vec![row[0].clone(), row[kp].clone(), row[kr].clone()]);
    }
    Ok(Outputs { tables: vec![table], plots: vec![rates, histogram] })
}

fn tomography(config: &ExperimentConfig) -> Result<Outputs> {
    let links = links(config)?;
    let mut table = Table::new(
        "tomography",
        &[
            ("link", ""),
            ("users", ""),
            ("fidelity_true", ""),
            ("fidelity_mle", ""),
            ("witness_mle", ""),
            ("e_tr_mle", ""),
            ("purity_mle", ""),
        ],
    );
    let mut elements = Table::new(
        "density_matrix",
        &[("link", ""), ("row", ""), ("col", ""), ("re", ""), ("im", "")],
    );
    for j in by_user_pair(&config.topology) {
        let pol = polarization(&links[j].rho)?;
        let input = TomographyInput::sample(&pol, config.shots, derive_seed(config.seed, j as u64))?;
        let est = mle_tomography(&input)?;
        table.push(vec![
            (j + 1).into(),
            pair_label(&config.topology, j).into(),
            fidelity_pure(&pol, &bell_target())?.into(),
            fidelity_pure(&est, &bell_target())?.into(),
            witness_expectation(&est)?.into(),
            e_tr(&est)?.into(),
            est.purity().into(),
        ]);
        let m = est.matrix();
        for r in 0..4 {
            for c in 0..4 {
                elements.push(vec![
                    (j + 1).into(),
                    POLARIZATION_BASIS[r].into(),
                    POLARIZATION_BASIS[c].into(),
                    m[(r, c)].re.into(),
                    m[(r, c)].im.into(),
                ]);
            }
        }
    }
    Ok(Outputs { tables: vec![table], plots: vec![elements] })
}

fn witness(config: &ExperimentConfig) -> Result<Outputs> {
    let links = links(config)?;
    let mut table = Table::new(
        "witness",
        &[("link", ""), ("users", ""), ("witness", ""), ("std_err", ""), ("witness_exact", ""), ("sigma", "")],
    );
    for j in by_user_pair(&config.topology) {
        let pol = polarization(&links[j].rho)?;
        let counts = simulate_witness_counts(&pol, config.shots, None, derive_seed(config.seed, j as u64))?;
        let (value, err) = witness_from_counts(&counts)?;
        table.push(vec![
            (j + 1).into(),
            pair_label(&config.topology, j).into(),
            value.into(),
            err.into(),
            witness_expectation(&pol)?.into(),
            (err > 0.0).then(|| -value / err).into(),
        ]);
    }
    Ok(Outputs { tables: vec![table], plots: Vec::new() })
}

fn attack(config: &ExperimentConfig) -> Result<Outputs> {
    let links = links(config)?;
    let spec = &config.attack.spec;
    let mut table = Table::new(
        "attack",
        &[
            ("link", ""),
            ("users", ""),
            ("witness_clean", ""),
            ("std_err_clean", ""),
            ("witness_attacked", ""),
            ("std_err_attacked", ""),
            ("reference_clean", ""),
            ("reference_attacked", ""),
        ],
    );
    let mut plot = Table::new("attack", &[("link", ""), ("condition", ""), ("witness", ""), ("std_err", "")]);
    for j in by_user_pair(&config.topology) {
        let pol = polarization(&links[j].rho)?;
        let seed = derive_seed(config.seed, j as u64);
        let mut hit = Vec::new();
        // same streams as the clean run, so suppression acts on identical draws
        for (k, basis) in [Pol::Plus, Pol::L, Pol::H].into_iter().enumerate() {
            let mut setting = ProjSetting::new(basis, basis, config.shots).with_attack(Some(spec.clone()));
            setting.window_ns = config.attack.window_ns;
            hit.push(projective_counts(&pol, &setting, derive_seed(seed, k as u64))?);
        }
        let clean = witness_from_counts(&simulate_witness_counts(&pol, config.shots, None, seed)?)?;
        let attacked = witness_from_counts(&hit)?;
        let reference = reference_index(&config.topology, j);
        table.push(vec![
            (j + 1).into(),
            pair_label(&config.topology, j).into(),
            clean.0.into(),
            clean.1.into(),
            attacked.0.into(),
            attacked.1.into(),
            reference.map(|k| ATTACK_WITNESS_CLEAN[k].0).into(),
            reference.map(|k| ATTACK_WITNESS_ATTACKED[k].0).into(),
        ]);
        for (name, (v, e)) in [("clean", clean), ("attacked", attacked)] {
            plot.push(vec![(j + 1).into(), name.into(), v.into(), e.into()]);
        }
    }
    Ok(Outputs { tables: vec![table], plots: vec![plot] })
}

fn mdi(config: &ExperimentConfig) -> Result<Outputs> {
    let links = links(config)?;
    let mut table = Table::new(
        "mdi",
        &[
            ("link", ""),
            ("users", ""),
            ("i_value", ""),
            ("std_err", ""),
            ("sigma", ""),
            ("lower_bound", ""),
            ("i_exact", ""),
            ("reference", ""),
        ],
    );
    let mut terms = Table::new(
        "mdi_terms",
        &[("link", ""), ("tau", ""), ("omega", ""), ("beta", ""), ("probability", ""), ("probability_exact", "")],
    );
    for j in by_user_pair(&config.topology) {
        let rho = &links[j].rho;
        let res = mdi_witness_from_bsm(rho, config.shots, derive_seed(config.seed, j as u64))?;
        let exact = mdi_witness(rho)?;
        table.push(vec![
            (j + 1).into(),
            pair_label(&config.topology, j).into(),
            res.i_value.into(),
            res.std_err.into(),
            (res.std_err > 0.0).then(|| -res.i_value / res.std_err).into(),
            res.lower_bound.into(),
            exact.i_value.into(),
            reference_index(&config.topology, j).map(|k| LINK_MDI_VALUES[k]).into(),
        ]);
        for (t, e) in res.terms.iter().zip(&exact.terms) {
            terms.push(vec![
                (j + 1).into(),
                t.tau.symbol().into(),
                t.omega.symbol().into(),
                t.beta.into(),
                t.probability.into(),
                e.probability.into(),
            ]);
        }
    }
    Ok(Outputs { tables: vec![table, terms], plots: Vec::new() })
}

fn theta_scan(config: &ExperimentConfig) -> Result<Outputs> {
    let cfg = &config.theta_scan;
    let mut table = Table::new(
        "theta_scan",
        &[
            ("theta", "rad"),
            ("i_value", ""),
            ("std_err", ""),
            ("lower_bound", ""),
            ("e_tr_mle", ""),
            ("e_tr_ideal", ""),
            ("visibility", ""),
            ("phase", "rad"),
            ("reference_lower_bound", ""),
            ("reference_e_tr", ""),
        ],
    );
    for (k, &theta) in cfg.thetas.iter().enumerate() {
        let reference = THETA_SCAN.iter().find(|r| (r.theta - theta).abs() < 1e-12);
        let cal = match (cfg.calibrate, reference) {
            (true, Some(r)) => calibrate_theta(theta, r.lower_bound, r.e_tr)?,
            _ => ThetaCalibration::ideal(theta),
        };
        let state = cal.state()?;
        let seed = derive_seed(config.seed, k as u64);
        let res = mdi_witness_from_bsm(&state, config.shots, seed)?;
        let input = TomographyInput::sample(&polarization(&state)?, cfg.tomography_shots, derive_seed(seed, 1))?;
        let recon = mle_tomography(&input)?;
        table.push(vec![
            theta.into(),
            res.i_value.into(),
            res.std_err.into(),
            res.lower_bound.into(),
            e_tr(&recon)?.into(),
            e_tr(&phi_theta(ThetaParam::new(theta)?).projector())?.into(),
            cal.visibility.into(),
            cal.phase.into(),
            reference.map(|r| r.lower_bound).into(),
            reference.map(|r| r.e_tr).into(),
        ]);
    }
    let mut plot = Table::new("theta_scan", &[("theta", "rad"), ("lower_bound", ""), ("e_tr_mle", "")]);
    let (kl, ke) = (table.column_index("lower_bound").unwrap(), table.column_index("e_tr_mle").unwrap());
    for row in &table.rows {
        plot.push(vec![row[0].clone(), row[kl].clone(), row[ke].clone()]);
    }
    Ok(Outputs { tables: vec![table], plots: vec![plot] })
}

fn allocate(topology: &NetworkTopology) -> Outputs {
    let mut pairs = Table::new(
        "channel_pairs",
        &[("pair", ""), ("signal", ""), ("idler", ""), ("signal_user", ""), ("idler_user", "")],
    );
    for (j, p) in topology.channel_pairs.iter().enumerate() {
        let (su, iu) = topology
            .link_map
            .get(j)
            .map_or((Cell::Missing, Cell::Missing), |(a, b)| (a.as_str().into(), b.as_str().into()));
        pairs.push(vec![(j + 1).into(), p.signal.label.as_str().into(), p.idler.label.as_str().into(), su, iu]);
    }
    let mut users = Table::new("users", &[("user", ""), ("channels", "")]);
    for u in &topology.users {
        let channels = topology.channels_of(u).unwrap_or_default().join(" ");
        users.push(vec![u.as_str().into(), channels.into()]);
    }
    let mut links = Table::new("links", &[("users", ""), ("link", "")]);
    for j in by_user_pair(topology) {
        links.push(vec![pair_label(topology, j).into(), (j + 1).into()]);
    }
    Outputs { tables: vec![pairs, users, links], plots: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

    #[test]
    fn default_links_follow_user_pair_order() {
        let topo = fcqn_core::network::default_allocation();
        let labels: Vec<String> = by_user_pair(&topo).into_iter().map(|j| pair_label(&topo, j)).collect();
        assert_eq!(labels, ["Alice-Bob", "Alice-Chloe", "Alice-David", "Bob-Chloe", "Bob-David", "Chloe-David"]);
        for (k, j) in by_user_pair(&topo).into_iter().enumerate() {
            assert_eq!(reference_index(&topo, j), Some(k));
        }
    }

    #[test]
    fn allocation_tables() {
        let cfg = validate_config("scenario = \"allocate\"\nseed = 0\n").unwrap();
        let out = run(&cfg).unwrap();
        let pairs = out.table("channel_pairs").unwrap();
        assert_eq!(pairs.rows.len(), 6);
        assert_eq!(pairs.rows[0][1], Cell::Text("C35".into()));
        assert_eq!(pairs.rows[0][3], Cell::Text("David".into()));
        let users = out.table("users").unwrap();
        assert_eq!(users.rows[0], vec![Cell::Text("Alice".into()), Cell::Text("i1 i4 s6".into())]);
    }

    #[test]
    fn witness_scenario_matches_exact_values() {
        let cfg = validate_config("scenario = \"witness\"\nseed = 5\nshots = 200000\n").unwrap();
        let out = run(&cfg).unwrap();
        let t = out.table("witness").unwrap();
        for row in &t.rows {
            let (v, e, x) = (row[2].as_f64().unwrap(), row[3].as_f64().unwrap(), row[4].as_f64().unwrap());
            assert!((v - x).abs() < 5.0 * e, "{v} vs {x} ± {e}");
        }
    }
}
