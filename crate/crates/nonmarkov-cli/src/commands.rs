use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde_json::json;

use nonmarkov::dynamics::{rate_decomposition, EvolveOptions, OpenSystem, QuadraticModel, Reservoir};
use nonmarkov::models::{gaussian_initial_state, tight_binding_chain, xy_chain, InitialState, Lead, TightBindingSpec, XYSpec};
use nonmarkov::nambu::{build_hamiltonian, HybridizationMatrix};
use nonmarkov::observables::{
    boundary_current, classify_decay, correlation_profile, energy_current_xy, number_observable, quadratic_expectation, Boundary, DecayFit,
    DecayOptions,
};
use nonmarkov::oracle::{bath_benchmark, DiscretizedBath};
use nonmarkov::steadystate::{infinite_bias_noise, n_infinity, steady_chi_for_noise, SteadyStateResult, DEFAULT_GAP_THRESHOLD};
use nonmarkov::{linalg, Error};

use crate::config::{self, Config, InitialConfig, ModelConfig, NoiseKind, SchemaError};
use crate::output::{num, opt, write_matrix, Manifest, Table};

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Schema(SchemaError),
    Numerical { context: String, error: Error },
    Io(PathBuf, std::io::Error),
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Schema(e) => write!(f, "{e}"),
            Failure::Numerical { context, error } => write!(f, "numerical failure while {context}: {error}"),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

pub trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T, Failure>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> Result<T, Failure> {
        self.map_err(|e| Failure::Io(path.to_path_buf(), e))
    }
}

/// Library errors caused by input become schema errors at `key`, the rest
/// are numerical failures.
pub fn lib_err<'a>(key: &'a str, context: &'a str) -> impl Fn(Error) -> Failure + 'a {
    move |e| {
        if e.is_input() {
            Failure::Schema(SchemaError::new(key, e.to_string()))
        } else {
            Failure::Numerical { context: context.to_string(), error: e }
        }
    }
}

fn read_matrix(path: &Path, key: &str) -> Result<linalg::CMat, Failure> {
    let f = File::open(path).map_err(|e| SchemaError::new(key, format!("{}: {e}", path.display())))?;
    nonmarkov::io::read_matrix_csv(BufReader::new(f)).map_err(|e| SchemaError::new(key, format!("{}: {e}", path.display())).into())
}

pub fn build_model(model: &ModelConfig) -> Result<QuadraticModel, Failure> {
    let err = lib_err("model", "building the model");
    match model {
        ModelConfig::TightBinding(tb) => tight_binding_chain(&TightBindingSpec {
            sites: tb.sites,
            gamma_left: tb.gamma_left,
            gamma_right: tb.gamma_right,
            left: Lead::new(tb.left.temperature.0, tb.left.mu),
            right: Lead::new(tb.right.temperature.0, tb.right.mu),
        })
        .map_err(err),
        ModelConfig::Xy(xy) => xy_chain(&XYSpec {
            sites: xy.sites,
            coupling: xy.coupling,
            anisotropy: xy.anisotropy,
            field: xy.field,
            delta_h: xy.delta_h,
            gamma_left: xy.gamma_left,
            gamma_right: xy.gamma_right,
            temperature_left: xy.temperature_left.0,
            temperature_right: xy.temperature_right.0,
        })
        .map_err(err),
        ModelConfig::Matrices(m) => {
            let h = read_matrix(&m.h, "model.h")?;
            let delta = match &m.delta {
                Some(p) => read_matrix(p, "model.delta")?,
                None => linalg::zeros(h.nrows()),
            };
            let ham = build_hamiltonian(&h, &delta).map_err(lib_err("model.h", "building the model"))?;
            let mut reservoirs = Vec::new();
            for (i, r) in m.reservoirs.iter().enumerate() {
                let key = format!("model.reservoirs[{i}].gamma");
                let g = read_matrix(&r.gamma, &key)?;
                let g = HybridizationMatrix::new(&g).map_err(lib_err(&key, "building the model"))?;
                let res = Reservoir::with_temperature(g, r.temperature.0, r.mu).map_err(lib_err(&key, "building the model"))?;
                reservoirs.push(res);
            }
            QuadraticModel::new(ham, reservoirs).map_err(err)
        }
    }
}

pub fn open_system(cfg: &ModelConfig) -> Result<OpenSystem, Failure> {
    let model = build_model(cfg)?;
    OpenSystem::new(model).map_err(lib_err("model", "decomposing the generator K"))
}

fn initial_state(cfg: &Config, system: &OpenSystem) -> Result<nonmarkov::dynamics::CorrelationMatrix, Failure> {
    let kind = match cfg.initial_state {
        InitialConfig::Vacuum => InitialState::Vacuum,
        InitialConfig::Filled => InitialState::Filled,
        InitialConfig::InfiniteTemperature => InitialState::InfiniteTemperature,
        InitialConfig::Thermal { temperature, mu } => InitialState::Thermal { beta: 1.0 / temperature.0, mu },
    };
    gaussian_initial_state(kind, system.model().hamiltonian()).map_err(lib_err("initial_state", "preparing the initial state"))
}

fn times(cfg: &Config) -> Result<Vec<f64>, Failure> {
    match &cfg.times {
        Some(g) => Ok(config::time_values(g)?),
        None => Err(SchemaError::new("times", "this command needs a time grid").into()),
    }
}

fn rate_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=2 * n).map(|k| format!("gamma_{k}")));
    h.push("f_nM".into());
    h
}

/// Worst `½‖N + hat(N) − 2Γ‖` seen, a cheap consistency check on `N(t)`.
struct NoiseChecks {
    hermiticity: f64,
    particle_hole: f64,
}

fn rate_row(
    system: &OpenSystem,
    t: f64,
    zero: f64,
    checks: &mut NoiseChecks,
) -> Result<(Vec<String>, nonmarkov::dynamics::RateDecomposition), Failure> {
    let noise = system.noise(t).map_err(lib_err("times", &format!("evaluating N(t) at t = {t}")))?;
    checks.hermiticity = checks.hermiticity.max(noise.hermiticity_defect);
    let sym = (&noise.matrix + &noise.matrix.hat()).scale(linalg::c(0.5, 0.0));
    checks.particle_hole = checks.particle_hole.max(sym.max_abs_diff(&system.model().gamma_total()));
    let rd = rate_decomposition(&noise.matrix, zero).map_err(lib_err("times", "diagonalizing N(t)"))?;
    let mut row = vec![num(t)];
    row.extend(rd.rates().iter().map(|&g| num(g)));
    row.push(num(rd.non_markovianity()));
    Ok((row, rd))
}

pub struct Outputs {
    pub files: Vec<PathBuf>,
    pub invariants: serde_json::Value,
}

pub fn evolve(cfg: &Config, out: &Path) -> Result<Outputs, Failure> {
    let system = open_system(&cfg.model)?;
    let grid = times(cfg)?;
    let chi0 = initial_state(cfg, &system)?;
    let opts = EvolveOptions { rel_tol: cfg.tolerances.ode_rel, abs_tol: cfg.tolerances.ode_abs, ..EvolveOptions::default() };
    let traj = system.evolve(&chi0, &grid, &opts).map_err(lib_err("times", "integrating the equation of motion"))?;
    let n = system.n();
    let mut checks = NoiseChecks { hermiticity: 0.0, particle_hole: 0.0 };
    let rates_path = out.join("evolve.csv");
    let mut rates = Table::create(&rates_path, &rate_header(n)).at(&rates_path)?;
    let occ_path = out.join("occupations.csv");
    let mut occ_header = vec!["t".to_string()];
    occ_header.extend((1..=n).map(|i| format!("n_{i}")));
    occ_header.push("invariant_defect".into());
    let mut occ = Table::create(&occ_path, &occ_header).at(&occ_path)?;
    let mut worst = traj.step_defects;
    for ((&t, state), defects) in traj.times.iter().zip(&traj.states).zip(&traj.defects) {
        let (row, _) = rate_row(&system, t, cfg.tolerances.zero_rate, &mut checks)?;
        rates.row(&row).at(&rates_path)?;
        let mut row = vec![num(t)];
        row.extend(state.occupations().into_iter().map(num));
        row.push(num(defects.worst()));
        occ.row(&row).at(&occ_path)?;
        worst.hermiticity = worst.hermiticity.max(defects.hermiticity);
        worst.particle_hole = worst.particle_hole.max(defects.particle_hole);
        worst.trace = worst.trace.max(defects.trace);
        worst.spectrum = worst.spectrum.max(defects.spectrum);
    }
    rates.finish().at(&rates_path)?;
    occ.finish().at(&occ_path)?;
    let chi_path = out.join("chi_final.csv");
    let last = traj.states.last().expect("non-empty grid");
    write_matrix(&chi_path, last.as_mat()).at(&chi_path)?;
    Ok(Outputs {
        files: vec![rates_path, occ_path, chi_path],
        invariants: json!({
            "chi_hermiticity": worst.hermiticity,
            "chi_particle_hole": worst.particle_hole,
            "chi_trace": worst.trace,
            "chi_spectrum_excursion": worst.spectrum,
            "noise_hermiticity_before_symmetrization": checks.hermiticity,
            "noise_particle_hole": checks.particle_hole,
            "accepted_steps": traj.accepted,
            "rejected_steps": traj.rejected,
        }),
    })
}

pub fn rates(cfg: &Config, out: &Path) -> Result<Outputs, Failure> {
    let system = open_system(&cfg.model)?;
    let grid = times(cfg)?;
    let n = system.n();
    let mut checks = NoiseChecks { hermiticity: 0.0, particle_hole: 0.0 };
    let rates_path = out.join("rates.csv");
    let mut table = Table::create(&rates_path, &rate_header(n)).at(&rates_path)?;
    let labels_path = out.join("labels.csv");
    let mut labels = Table::create(&labels_path, &["t".into(), "k".into(), "gamma".into(), "label".into()]).at(&labels_path)?;
    let mut max_active = 0usize;
    for &t in &grid {
        let (row, rd) = rate_row(&system, t, cfg.tolerances.zero_rate, &mut checks)?;
        table.row(&row).at(&rates_path)?;
        let active = rd.active();
        max_active = max_active.max(active.len());
        for l in active {
            labels.row(&[num(t), (l + 1).to_string(), num(rd.rates()[l]), rd.label(l).to_string()]).at(&labels_path)?;
        }
    }
    table.finish().at(&rates_path)?;
    labels.finish().at(&labels_path)?;
    let t_last = *grid.last().expect("non-empty grid");
    let noise_path = out.join("noise_final.csv");
    let noise = system.noise(t_last).map_err(lib_err("times", "evaluating N(t)"))?;
    write_matrix(&noise_path, noise.matrix.as_mat()).at(&noise_path)?;
    Ok(Outputs {
        files: vec![rates_path, labels_path, noise_path],
        invariants: json!({
            "noise_hermiticity_before_symmetrization": checks.hermiticity,
            "noise_particle_hole": checks.particle_hole,
            "max_active_rates": max_active,
        }),
    })
}

/// Steady state and the quantities reported for it.
pub struct SteadySummary {
    pub state: SteadyStateResult,
    pub f_nm: f64,
    pub current: Option<f64>,
    pub decay: Option<DecayFit>,
    pub profile: Vec<(usize, f64)>,
}

fn chain_geometry(model: &ModelConfig) -> Option<usize> {
    match model {
        ModelConfig::TightBinding(tb) => Some(tb.sites),
        ModelConfig::Xy(xy) => Some(xy.sites),
        ModelConfig::Matrices(_) => None,
    }
}

/// Checks the bond index against the chain length.
pub fn bond(cfg: &Config) -> Result<Option<usize>, SchemaError> {
    let Some(n) = chain_geometry(&cfg.model) else {
        return Ok(None);
    };
    // The energy current at bond m touches sites m - 1, m and m + 1.
    let last = match &cfg.model {
        ModelConfig::Xy(_) => n.saturating_sub(2),
        _ => n - 1,
    };
    let b = match cfg.steady.bond {
        Some(b) => b,
        None if last == 0 => return Ok(None),
        None => (n / 2).clamp(1, last),
    };
    if b < 1 || b > last {
        return Err(SchemaError::new("steady.bond", format!("must lie in [1, {last}] for {n} sites, got {b}")));
    }
    Ok(Some(b))
}

pub fn analyze(model: &ModelConfig, system: &OpenSystem, cfg: &Config, bond: Option<usize>) -> Result<SteadySummary, Error> {
    let noise = match cfg.steady.noise {
        NoiseKind::Exact => n_infinity(system)?.matrix,
        NoiseKind::InfiniteBias => infinite_bias_noise(system),
    };
    let state = steady_chi_for_noise(system, &noise, cfg.tolerances.steady, DEFAULT_GAP_THRESHOLD)?;
    let f_nm = rate_decomposition(&state.n_inf, cfg.tolerances.zero_rate)?.non_markovianity();
    let current = match (model, bond) {
        (ModelConfig::Xy(xy), Some(b)) => {
            let j = energy_current_xy(xy.sites, xy.coupling, xy.anisotropy, xy.field, b)?;
            Some(quadratic_expectation(&state.chi_inf, &j)?)
        }
        (ModelConfig::TightBinding(tb), Some(b)) => {
            let q = number_observable(tb.sites)?;
            let j = boundary_current(system.model().hamiltonian(), b..=tb.sites - 1, &q, Boundary::Left)?;
            Some(quadratic_expectation(&state.chi_inf, &j)?)
        }
        _ => None,
    };
    let (profile, decay) = match chain_geometry(model) {
        Some(n) => {
            let profile = correlation_profile(&state.chi_inf)?;
            let decay = classify_decay(&profile, &DecayOptions::for_chain(n)).ok();
            (profile, decay)
        }
        None => (Vec::new(), None),
    };
    Ok(SteadySummary { state, f_nm, current, decay, profile })
}

pub const STEADY_COLUMNS: [&str; 7] = ["f_nM", "current", "decay_kind", "decay_exponent", "decay_length", "residual", "min_gap"];

pub fn steady_fields(s: &SteadySummary) -> Vec<String> {
    vec![
        num(s.f_nm),
        opt(s.current),
        s.decay.map(|d| d.kind.to_string()).unwrap_or_else(|| "none".into()),
        opt(s.decay.map(|d| d.exponent)),
        opt(s.decay.map(|d| d.length)),
        num(s.state.residual),
        num(s.state.min_gap),
    ]
}

pub fn steady(cfg: &Config, out: &Path) -> Result<Outputs, Failure> {
    let system = open_system(&cfg.model)?;
    let b = bond(cfg)?;
    let s = analyze(&cfg.model, &system, cfg, b).map_err(lib_err("model", "solving for the steady state"))?;
    let path = out.join("steady.csv");
    let header: Vec<String> = STEADY_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut t = Table::create(&path, &header).at(&path)?;
    t.row(&steady_fields(&s)).at(&path)?;
    t.finish().at(&path)?;
    let chi_path = out.join("chi_inf.csv");
    write_matrix(&chi_path, s.state.chi_inf.as_mat()).at(&chi_path)?;
    let n_path = out.join("n_inf.csv");
    write_matrix(&n_path, s.state.n_inf.as_mat()).at(&n_path)?;
    let rd = rate_decomposition(&s.state.n_inf, cfg.tolerances.zero_rate).map_err(lib_err("model", "diagonalizing N_inf"))?;
    let rates_path = out.join("rates_inf.csv");
    let mut rt = Table::create(&rates_path, &["k".into(), "gamma".into(), "label".into()]).at(&rates_path)?;
    for l in 0..rd.rates().len() {
        rt.row(&[(l + 1).to_string(), num(rd.rates()[l]), rd.label(l).to_string()]).at(&rates_path)?;
    }
    rt.finish().at(&rates_path)?;
    let mut files = vec![path, chi_path, n_path, rates_path];
    if !s.profile.is_empty() {
        let p = out.join("profile.csv");
        let mut pt = Table::create(&p, &["r".into(), "c_bar".into()]).at(&p)?;
        for &(r, v) in &s.profile {
            pt.row(&[r.to_string(), num(v)]).at(&p)?;
        }
        pt.finish().at(&p)?;
        files.push(p);
    }
    let inv = s.state.chi_inf.invariants().map_err(lib_err("model", "checking invariants"))?;
    Ok(Outputs {
        files,
        invariants: json!({
            "residual": s.state.residual,
            "min_gap": s.state.min_gap,
            "chi_hermiticity": inv.hermiticity,
            "chi_particle_hole": inv.particle_hole,
            "chi_trace": inv.trace,
            "chi_spectrum_excursion": inv.spectrum,
        }),
    })
}

pub fn oracle(cfg: &Config, out: &Path) -> Result<Outputs, Failure> {
    let system = open_system(&cfg.model)?;
    let grid = times(cfg)?;
    let chi0 = initial_state(cfg, &system)?;
    let bath = DiscretizedBath::new(cfg.oracle.modes, cfg.oracle.bandwidth).map_err(lib_err("oracle", "building the bath"))?;
    let report = bath_benchmark(system.model(), &chi0, &bath, &grid).map_err(lib_err("oracle", "running the bath oracle"))?;
    if report.recurrence_warning {
        eprintln!(
            "warning: the time grid reaches half the bath recurrence time {:.4}; deviations past it are finite-bath artifacts",
            report.recurrence_time
        );
    }
    let path = out.join("oracle.csv");
    let mut t = Table::create(&path, &["t".into(), "max_abs_deviation".into()]).at(&path)?;
    for &(time, dev) in &report.rows {
        t.row(&[num(time), num(dev)]).at(&path)?;
    }
    t.finish().at(&path)?;
    Ok(Outputs {
        files: vec![path],
        invariants: json!({
            "max_deviation": report.max_deviation,
            "recurrence_time": report.recurrence_time,
            "recurrence_warning": report.recurrence_warning,
            "total_modes": report.total_modes,
        }),
    })
}

/// Writes the manifest for a finished command.
pub fn finish(command: &str, cfg: &Config, out: &Path, outputs: Outputs) -> Result<(), Failure> {
    let mut m = Manifest::new(command, cfg, "complete");
    m.outputs = crate::output::file_names(&outputs.files);
    m.invariants = outputs.invariants;
    m.write(out).at(&out.join("manifest.json"))
}
