//! Trajectory orchestration and convergence statistics.
//!
//! Every trajectory gets its own RNG stream derived from the config seed and
//! its index, trajectories run in parallel, and the per-iteration reduction
//! is done in trajectory order, so curves are identical for any thread count.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Result, TwirlError};
use crate::linalg::{conjugate_local, fmt_f64, hs_distance_sq, hs_norm_sq, left_apply_local, ComplexMatrix};
use crate::random::{draw_unitary, hs_random_density, RngHandle, UnitarySource};
use crate::superop::{
    exact_twirl_superop, format_theory, mix_superop, superop_error, superop_gap, Superoperator, TheoryLaw,
    MAX_SUPEROP_DIM,
};
use crate::twirl::{
    build_isotropic_basis, build_permutation_basis, default_ising_alpha, deterministic_schedule, exact_twirl,
    DensityMatrix, PermutationBasis, QuditRegister, RecursiveTwirl, ScheduleKind, TwirlPlan, Variant,
    DEFAULT_TWO_QUBIT_C,
};

/// CSV header shared by every curve file.
pub const CSV_HEADER: &str = "iteration,mean_sq_error,std_error,theory";

/// Stream offset separating initial-state draws from unitary draws.
const STATE_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    State,
    Superoperator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `Q_{K,M}`: record after each of `M_max` iterations of `P_K`.
    #[default]
    Recursive,
    /// `P_M` with a growing number of terms `M = 1..=M_max`.
    Averaging,
    /// Repeated single conjugations `ρ ← WρW†` with no mixing.
    Conjugation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Squared HS distance to the exact reference.
    #[default]
    Raw,
    /// Raw error divided by the trajectory's initial gap.
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Given(DensityMatrix),
    /// A fresh Hilbert-Schmidt random state for every trajectory.
    HsRandom,
}

/// Which closed form is attached to the curve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TheoryChoice {
    /// Derived from the scheme and source kind when one applies.
    #[default]
    Auto,
    None,
    Law(TheoryLaw),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub register: QuditRegister,
    pub mode: Mode,
    pub scheme: Scheme,
    pub k: usize,
    pub max_iterations: usize,
    pub source: UnitarySource,
    pub variant: Variant,
    pub trajectories: usize,
    pub seed: u64,
    pub metric: Metric,
    /// Ignored in superoperator mode.
    pub initial: InitialState,
    pub theory: TheoryChoice,
}

impl ExperimentConfig {
    /// Two-branch recursive Haar twirl in the given mode.
    pub fn new(register: QuditRegister, mode: Mode, max_iterations: usize, trajectories: usize, seed: u64) -> Self {
        ExperimentConfig {
            register,
            mode,
            scheme: Scheme::Recursive,
            k: 2,
            max_iterations,
            source: UnitarySource::Haar,
            variant: Variant::Werner,
            trajectories,
            seed,
            metric: Metric::Raw,
            initial: InitialState::HsRandom,
            theory: TheoryChoice::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(TwirlError::InvalidParameter("trajectories must be >= 1".into()));
        }
        TwirlPlan::new(self.register, self.k, self.max_iterations, self.source.clone(), self.variant)?;
        if self.scheme == Scheme::Averaging && self.max_iterations == 0 {
            return Err(TwirlError::InvalidParameter("averaging needs M_max >= 1".into()));
        }
        if self.mode == Mode::Superoperator {
            let side = self.register.dim().checked_mul(self.register.dim());
            if side.is_none_or(|s| s > MAX_SUPEROP_DIM) {
                return Err(TwirlError::ResourceGuard(format!(
                    "superoperator mode limited to d^(2N) <= {MAX_SUPEROP_DIM}"
                )));
            }
        }
        if let (Mode::State, InitialState::Given(rho)) = (self.mode, &self.initial) {
            if rho.dim() != self.register.dim() {
                return Err(TwirlError::Shape(format!(
                    "initial state has dimension {}, register needs {}",
                    rho.dim(),
                    self.register.dim()
                )));
            }
        }
        Ok(())
    }

    fn first_record(&self) -> usize {
        if self.scheme == Scheme::Averaging {
            1
        } else {
            0
        }
    }

    fn auto_law(&self) -> Option<TheoryLaw> {
        match (self.scheme, &self.source) {
            (Scheme::Recursive, UnitarySource::Haar) => Some(TheoryLaw::RecursiveExponential { k: self.k }),
            (Scheme::Recursive, UnitarySource::Biased { p_g, .. }) if self.k == 2 => {
                Some(TheoryLaw::BiasedBound { p_g: *p_g })
            }
            (Scheme::Averaging, UnitarySource::Haar) => Some(TheoryLaw::AvgAlgebraic),
            _ => None,
        }
    }

    fn law(&self) -> Option<TheoryLaw> {
        match self.theory {
            TheoryChoice::Auto => self.auto_law(),
            TheoryChoice::None => None,
            TheoryChoice::Law(l) => Some(l),
        }
    }

    /// JSON echo of every resolved parameter.
    pub fn to_json_value(&self) -> serde_json::Value {
        let initial = match (&self.mode, &self.initial) {
            (Mode::Superoperator, _) => json!("identity-superoperator"),
            (_, InitialState::HsRandom) => json!("hs-random-per-trajectory"),
            (_, InitialState::Given(rho)) => {
                serde_json::from_str::<serde_json::Value>(&rho.matrix().to_json()).unwrap_or(json!("given"))
            }
        };
        json!({
            "n": self.register.n_qudits,
            "d": self.register.local_dim,
            "mode": self.mode,
            "scheme": self.scheme,
            "k": self.k,
            "max_iterations": self.max_iterations,
            "source": self.source.describe(),
            "variant": self.variant,
            "trajectories": self.trajectories,
            "seed": self.seed,
            "metric": self.metric,
            "initial": initial,
            "reference": match self.mode { Mode::State => "exact-twirl", Mode::Superoperator => "exact-superop" },
            "theory": self.law().map(|l| serde_json::to_value(l).unwrap_or_default()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub iteration: usize,
    pub mean: f64,
    pub std_error: f64,
    pub theory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub records: Vec<ErrorRecord>,
    /// Mean initial gap across trajectories (`1` for the normalized metric).
    pub gap: f64,
    pub metadata: serde_json::Value,
}

impl ErrorCurve {
    pub fn record(&self, iteration: usize) -> Option<&ErrorRecord> {
        self.records.iter().find(|r| r.iteration == iteration)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.iteration, fmt_f64(r.mean), fmt_f64(r.std_error), format_theory(r.theory));
        }
        out
    }

    /// Metadata document: config echo, version and a wall-clock timestamp
    /// (the only field that changes between identical runs).
    pub fn metadata_json(&self) -> String {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = json!({
            "config": self.metadata,
            "gap": self.gap,
            "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
            "timestamp_unix": timestamp,
        });
        serde_json::to_string_pretty(&doc).unwrap_or_default()
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        let meta = dir.join(format!("{stem}.json"));
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&meta, self.metadata_json())?;
        Ok((csv, meta))
    }
}

fn basis_for(reg: QuditRegister, variant: Variant) -> Result<PermutationBasis> {
    match variant {
        Variant::Werner => build_permutation_basis(reg),
        Variant::Isotropic => build_isotropic_basis(reg),
    }
}

enum Reference {
    State(PermutationBasis),
    Superop(Superoperator, f64),
}

fn local_refs(factors: &[ComplexMatrix]) -> Vec<&ComplexMatrix> {
    factors.iter().collect()
}

/// Errors of one trajectory at every recorded iteration, plus its gap.
fn run_trajectory(cfg: &ExperimentConfig, reference: &Reference, index: usize) -> Result<(Vec<f64>, f64)> {
    let reg = cfg.register;
    let mut rng = RngHandle::new(cfg.seed, index as u64);
    let plan = TwirlPlan::new(reg, cfg.k, cfg.max_iterations, cfg.source.clone(), cfg.variant)?;
    let mut driver = RecursiveTwirl::new(&plan)?;
    let mut errors = Vec::with_capacity(cfg.max_iterations + 1);
    let first = cfg.first_record();
    match reference {
        Reference::State(basis) => {
            let rho = match &cfg.initial {
                InitialState::Given(r) => r.clone(),
                InitialState::HsRandom => {
                    hs_random_density(reg.dim(), &mut RngHandle::new(cfg.seed, index as u64 | STATE_STREAM_BIT))?
                }
            };
            let target = exact_twirl(&rho, basis)?;
            let gap = hs_norm_sq(rho.matrix()).value() - hs_norm_sq(target.matrix()).value();
            let scale = match cfg.metric {
                Metric::Raw => 1.0,
                Metric::Normalized if gap > 0.0 => 1.0 / gap,
                Metric::Normalized => {
                    return Err(TwirlError::InvalidState("normalized error undefined for an invariant state".into()))
                }
            };
            let err = |m: &ComplexMatrix| hs_distance_sq(m, target.matrix()).map(|e| e * scale);
            match cfg.scheme {
                Scheme::Recursive | Scheme::Conjugation => {
                    let mut state = rho;
                    errors.push(err(state.matrix())?);
                    for step in 0..cfg.max_iterations {
                        state = if cfg.scheme == Scheme::Recursive {
                            driver.step(&state, &mut rng)?
                        } else {
                            let u = draw_unitary(&cfg.source, reg.local_dim, step, &mut rng)?;
                            let factors = cfg.variant.local_factors(&u, reg);
                            DensityMatrix::new(conjugate_local(state.matrix(), &local_refs(&factors))?)?
                        };
                        errors.push(err(state.matrix())?);
                    }
                }
                Scheme::Averaging => {
                    let mut sum = rho.matrix().clone();
                    errors.push(err(&sum)?);
                    for m in 2..=cfg.max_iterations {
                        let u = draw_unitary(&cfg.source, reg.local_dim, m - 2, &mut rng)?;
                        let factors = cfg.variant.local_factors(&u, reg);
                        sum += &conjugate_local(rho.matrix(), &local_refs(&factors))?;
                        errors.push(err(&sum.scale_real(1.0 / m as f64))?);
                    }
                }
            }
            debug_assert_eq!(errors.len(), cfg.max_iterations + 1 - first);
            Ok((errors, gap * scale))
        }
        Reference::Superop(s_p, gap) => {
            let scale = match cfg.metric {
                Metric::Raw => 1.0,
                Metric::Normalized => 1.0 / gap,
            };
            let id = Superoperator::identity(reg.n_qudits, reg.local_dim)?;
            let conj_factors = |u: &ComplexMatrix| {
                let f = cfg.variant.local_factors(u, reg);
                f.iter().map(ComplexMatrix::conj).chain(f.iter().cloned()).collect::<Vec<_>>()
            };
            match cfg.scheme {
                Scheme::Recursive | Scheme::Conjugation => {
                    let mut s = id;
                    errors.push(superop_error(&s, s_p)? * scale);
                    for step in 0..cfg.max_iterations {
                        s = if cfg.scheme == Scheme::Recursive {
                            let us = driver.draw_branch_unitaries(&mut rng)?;
                            mix_superop(&s, &us, reg, cfg.variant)?
                        } else {
                            let u = draw_unitary(&cfg.source, reg.local_dim, step, &mut rng)?;
                            let mut m = s.matrix().clone();
                            left_apply_local(&mut m, &local_refs(&conj_factors(&u)))?;
                            Superoperator::new(reg.n_qudits, reg.local_dim, m)?
                        };
                        errors.push(superop_error(&s, s_p)? * scale);
                    }
                }
                Scheme::Averaging => {
                    let one = id.matrix().clone();
                    let mut sum = one.clone();
                    errors.push(hs_distance_sq(&sum, s_p.matrix())? * scale);
                    for m in 2..=cfg.max_iterations {
                        let u = draw_unitary(&cfg.source, reg.local_dim, m - 2, &mut rng)?;
                        let mut c = one.clone();
                        left_apply_local(&mut c, &local_refs(&conj_factors(&u)))?;
                        sum += &c;
                        errors.push(hs_distance_sq(&sum.scale_real(1.0 / m as f64), s_p.matrix())? * scale);
                    }
                }
            }
            Ok((errors, gap * scale))
        }
    }
}

/// Runs all trajectories and aggregates mean and standard error per iteration.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ErrorCurve> {
    cfg.validate()?;
    let reg = cfg.register;
    let basis = basis_for(reg, cfg.variant)?;
    let reference = match cfg.mode {
        Mode::State => Reference::State(basis),
        Mode::Superoperator => {
            let gap = superop_gap(&basis);
            Reference::Superop(exact_twirl_superop(reg, &basis)?, gap)
        }
    };
    let runs = (0..cfg.trajectories)
        .into_par_iter()
        .map(|t| run_trajectory(cfg, &reference, t))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let gap = runs.iter().map(|r| r.1).sum::<f64>() / n;
    let law = cfg.law();
    let first = cfg.first_record();
    let records = (0..runs[0].0.len())
        .map(|i| {
            let mean = runs.iter().map(|r| r.0[i]).sum::<f64>() / n;
            let var = if runs.len() > 1 {
                runs.iter().map(|r| (r.0[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let iteration = i + first;
            ErrorRecord { iteration, mean, std_error: (var / n).sqrt(), theory: law.and_then(|l| l.value(gap, iteration)) }
        })
        .collect();
    Ok(ErrorCurve { records, gap, metadata: cfg.to_json_value() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Minus the least-squares slope of `log₂(mean)` per iteration.
    pub rate_bits: f64,
    /// Coefficient of determination of the linear fit.
    pub goodness: f64,
}

/// Fits `log₂(mean error)` against iteration over `window`.
pub fn fit_decay_rate(curve: &ErrorCurve, window: RangeInclusive<usize>) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = curve
        .records
        .iter()
        .filter(|r| window.contains(&r.iteration))
        .map(|r| {
            if r.mean > 0.0 {
                Ok((r.iteration as f64, r.mean.log2()))
            } else {
                Err(TwirlError::InvalidParameter(format!("non-positive mean {} at iteration {}", r.mean, r.iteration)))
            }
        })
        .collect::<Result<_>>()?;
    fit_log2_points(&pts)
}

/// Least-squares line through `(x, y)` points; returns `−slope` and `R²`.
pub fn fit_log2_points(pts: &[(f64, f64)]) -> Result<DecayFit> {
    if pts.len() < 2 {
        return Err(TwirlError::InvalidParameter("fit needs at least two points".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let goodness = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit { rate_bits: -slope, goodness })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig2, Figure::Fig3a, Figure::Fig3b, Figure::Fig4a, Figure::Fig4b];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| TwirlError::Parse(format!("unknown figure '{s}' (expected fig2, fig3a, fig3b, fig4a, fig4b)")))
    }
}

/// Preset parameters for a figure.
///
/// - fig2: three qubits, superoperator, Haar, 10⁴ trajectories, 20 iterations.
/// - fig3a: two qubits, superoperator, `[e^{icσ_x}, e^{icσ_z}]` with the default `c`, 50 iterations.
/// - fig3b: three qubits, superoperator, the xyz cycle, 40 iterations.
/// - fig4a/b: two qudits with `d = 8`/`16`, Ising unitaries, 25 HS-random
///   states, normalized error against `2^{−M}`, 30 iterations.
pub fn preset(figure: Figure, seed: u64) -> Result<ExperimentConfig> {
    let qubits = |n| QuditRegister::new(n, 2);
    let cfg = match figure {
        Figure::Fig2 => ExperimentConfig::new(qubits(3)?, Mode::Superoperator, 20, 10_000, seed),
        Figure::Fig3a => ExperimentConfig {
            source: deterministic_schedule(ScheduleKind::TwoQubitC(DEFAULT_TWO_QUBIT_C)),
            theory: TheoryChoice::Law(TheoryLaw::RecursiveExponential { k: 2 }),
            ..ExperimentConfig::new(qubits(2)?, Mode::Superoperator, 50, 1, seed)
        },
        Figure::Fig3b => ExperimentConfig {
            source: deterministic_schedule(ScheduleKind::ThreeQubitXyz),
            theory: TheoryChoice::Law(TheoryLaw::RecursiveExponential { k: 2 }),
            ..ExperimentConfig::new(qubits(3)?, Mode::Superoperator, 40, 1, seed)
        },
        Figure::Fig4a | Figure::Fig4b => {
            let n_qubits = if figure == Figure::Fig4a { 3 } else { 4 };
            ExperimentConfig {
                source: UnitarySource::Ising { n_qubits, alpha: default_ising_alpha(n_qubits) },
                metric: Metric::Normalized,
                theory: TheoryChoice::Law(TheoryLaw::RecursiveExponential { k: 2 }),
                ..ExperimentConfig::new(QuditRegister::new(2, 1 << n_qubits)?, Mode::State, 30, 25, seed)
            }
        }
    };
    Ok(cfg)
}

/// Runs a figure preset and writes `<out_dir>/<figure>.csv` plus metadata.
pub fn reproduce(figure: Figure, seed: u64, out_dir: &Path) -> Result<(ErrorCurve, PathBuf, PathBuf)> {
    let curve = run_convergence(&preset(figure, seed)?)?;
    let (csv, meta) = curve.write_files(out_dir, figure.name())?;
    Ok((curve, csv, meta))
}

/// Superoperator error of the two-qubit cycle `[e^{icσ_x}, e^{icσ_z}]`
/// after `iterations` steps.
pub fn two_qubit_cycle_error(cv: f64, iterations: usize) -> Result<f64> {
    let reg = QuditRegister::new(2, 2)?;
    let basis = build_permutation_basis(reg)?;
    let s_p = exact_twirl_superop(reg, &basis)?;
    let plan = TwirlPlan::recursive(reg, iterations, deterministic_schedule(ScheduleKind::TwoQubitC(cv)))?;
    let s = crate::superop::recursive_twirl_superop(&plan, &mut RngHandle::new(0, 0))?;
    superop_error(&s, &s_p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSearch {
    pub best_c: f64,
    pub best_error: f64,
    pub grid: Vec<(f64, f64)>,
}

/// Grid search of `c ∈ [0, π/2]` minimizing the two-qubit cycle error
/// after `iterations` steps.
pub fn search_two_qubit_c(step: f64, iterations: usize) -> Result<CSearch> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(TwirlError::InvalidParameter(format!("grid step {step} must be positive")));
    }
    let points = (FRAC_PI_2 / step).floor() as usize;
    let grid = (0..=points)
        .into_par_iter()
        .map(|i| {
            let cv = i as f64 * step;
            two_qubit_cycle_error(cv, iterations).map(|e| (cv, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let &(best_c, best_error) = grid
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| TwirlError::InvalidParameter("empty grid".into()))?;
    Ok(CSearch { best_c, best_error, grid })
}
