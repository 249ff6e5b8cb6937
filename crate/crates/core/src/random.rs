//! Seeded sampling: Ginibre and Haar matrices, Hilbert-Schmidt random
//! states and the unitary sources consumed by the twirling iterations.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TwirlError};
use crate::linalg::{c, matrices_from_json, ComplexMatrix, C64};
use crate::twirl::{ising_unitary, DensityMatrix};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of stream `stream` under master seed `seed`:
/// `splitmix64(seed ^ splitmix64(stream))`.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// A seeded random stream. Equal `(seed, stream)` pairs replay identical
/// sample sequences; parallel workers each get their own stream.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngHandle { seed, stream, rng: ChaCha8Rng::seed_from_u64(mix_seed(seed, stream)) }
    }

    /// Fresh handle on another stream of the same master seed.
    pub fn with_stream(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Standard complex Gaussian, `E|z|² = 1`.
    pub fn complex_normal(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        c(self.normal() * s, self.normal() * s)
    }
}

/// Matrix of i.i.d. standard complex Gaussians (`E z = 0`, `E|z|² = 1`).
pub fn ginibre(rows: usize, cols: usize, rng: &mut RngHandle) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Err(TwirlError::InvalidParameter("ginibre dimensions must be >= 1".into()));
    }
    let data = (0..rows * cols).map(|_| rng.complex_normal()).collect();
    ComplexMatrix::from_vec(rows, cols, data)
}

/// Haar-distributed `d×d` unitary.
///
/// QR of a complex Ginibre matrix by twice-iterated Gram-Schmidt. The
/// Gram-Schmidt `R` factor has a positive real diagonal, which is exactly
/// the phase fix that makes `Q` Haar distributed.
pub fn haar_unitary(d: usize, rng: &mut RngHandle) -> Result<ComplexMatrix> {
    if d == 0 {
        return Err(TwirlError::InvalidParameter("unitary dimension must be >= 1".into()));
    }
    let g = ginibre(d, d, rng)?;
    // columns of g as contiguous vectors
    let mut cols: Vec<Vec<C64>> = (0..d).map(|j| (0..d).map(|i| g[(i, j)]).collect()).collect();
    for j in 0..d {
        for _pass in 0..2 {
            for k in 0..j {
                let proj: C64 = cols[k].iter().zip(&cols[j]).map(|(q, v)| q.conj() * v).sum();
                let (head, tail) = cols.split_at_mut(j);
                for (v, q) in tail[0].iter_mut().zip(&head[k]) {
                    *v -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for v in &mut cols[j] {
            *v /= norm;
        }
    }
    let mut q = ComplexMatrix::zeros(d, d);
    for (j, col) in cols.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            q[(i, j)] = z;
        }
    }
    Ok(q)
}

/// `ρ = GG†/Tr(GG†)` for square Ginibre `G`: uniform in the Hilbert-Schmidt
/// measure.
pub fn hs_random_density(dim: usize, rng: &mut RngHandle) -> Result<DensityMatrix> {
    let g = ginibre(dim, dim, rng)?;
    let mut rho = g.matmul(&g.adjoint())?;
    let tr = rho.trace().re;
    rho = rho.scale_real(1.0 / tr);
    // exact Hermitian symmetrization against round-off
    let sym = (&rho + &rho.adjoint()).scale_real(0.5);
    DensityMatrix::new(sym)
}

/// The biased component `g(U)` of a faulty source.
#[derive(Debug, Clone, PartialEq)]
pub enum GSpec {
    /// Always the fixed unitary `V`.
    DeltaAt(ComplexMatrix),
    /// `V·diag(e^{iεθ_j})·V†` with Haar `V` and `θ_j` uniform in `(−π, π]`.
    NarrowHaar { epsilon: f64 },
}

impl GSpec {
    pub const DEFAULT_EPSILON: f64 = 0.1;

    /// Delta at the Haar draw of stream 0 under seed 0.
    pub fn default_delta(d: usize) -> Result<Self> {
        Ok(GSpec::DeltaAt(haar_unitary(d, &mut RngHandle::new(0, 0))?))
    }

    fn validate(&self) -> Result<()> {
        match self {
            GSpec::DeltaAt(v) => v.require_unitary(),
            GSpec::NarrowHaar { epsilon } if *epsilon > 0.0 && epsilon.is_finite() => Ok(()),
            GSpec::NarrowHaar { .. } => Err(TwirlError::InvalidParameter("narrow-haar epsilon must be > 0".into())),
        }
    }

    fn sample(&self, d: usize, rng: &mut RngHandle) -> Result<ComplexMatrix> {
        match self {
            GSpec::DeltaAt(v) => {
                if v.rows() != d {
                    return Err(TwirlError::Shape(format!("delta unitary is {0}x{0}, need {d}x{d}", v.rows())));
                }
                Ok(v.clone())
            }
            GSpec::NarrowHaar { epsilon } => {
                let v = haar_unitary(d, rng)?;
                let phases: Vec<C64> =
                    (0..d).map(|_| C64::from_polar(1.0, epsilon * PI * (2.0 * rng.uniform() - 1.0))).collect();
                Ok(&(&v * &ComplexMatrix::from_diag(&phases)) * &v.adjoint())
            }
        }
    }
}

/// Generator of the unitaries fed to the twirling iterations.
#[derive(Debug, Clone, PartialEq)]
pub enum UnitarySource {
    Haar,
    /// With probability `p_g` draw from `g`, otherwise Haar.
    Biased { p_g: f64, g: GSpec },
    /// `list[step mod len]`.
    Cycle(Vec<ComplexMatrix>),
    /// Random single-qubit layer followed by a periodic Ising evolution.
    Ising { n_qubits: usize, alpha: f64 },
}

impl UnitarySource {
    pub fn validate(&self) -> Result<()> {
        match self {
            UnitarySource::Haar => Ok(()),
            UnitarySource::Biased { p_g, g } => {
                if !(0.0..=1.0).contains(p_g) {
                    return Err(TwirlError::InvalidParameter(format!("p_g = {p_g} outside [0, 1]")));
                }
                g.validate()
            }
            UnitarySource::Cycle(list) => {
                let first = list
                    .first()
                    .ok_or_else(|| TwirlError::InvalidParameter("empty unitary cycle".into()))?;
                for u in list {
                    u.require_unitary()?;
                    if u.rows() != first.rows() {
                        return Err(TwirlError::Shape("cycle unitaries differ in size".into()));
                    }
                }
                Ok(())
            }
            UnitarySource::Ising { n_qubits, alpha } => {
                if *n_qubits < 2 {
                    return Err(TwirlError::InvalidParameter("ising source needs n >= 2".into()));
                }
                if !alpha.is_finite() {
                    return Err(TwirlError::InvalidParameter("ising alpha must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Local dimension fixed by the source itself, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            UnitarySource::Haar => None,
            UnitarySource::Biased { g: GSpec::DeltaAt(v), .. } => Some(v.rows()),
            UnitarySource::Biased { .. } => None,
            UnitarySource::Cycle(list) => list.first().map(ComplexMatrix::rows),
            UnitarySource::Ising { n_qubits, .. } => 1usize.checked_shl(*n_qubits as u32),
        }
    }

    /// Whether draws consume randomness.
    pub fn is_random(&self) -> bool {
        !matches!(self, UnitarySource::Cycle(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            UnitarySource::Haar => "haar",
            UnitarySource::Biased { .. } => "biased",
            UnitarySource::Cycle(_) => "cycle",
            UnitarySource::Ising { .. } => "ising",
        }
    }

    /// Human-readable description used in run metadata.
    pub fn describe(&self) -> String {
        match self {
            UnitarySource::Haar => "haar".into(),
            UnitarySource::Biased { p_g, g: GSpec::DeltaAt(_) } => format!("biased:pg={p_g},g=delta"),
            UnitarySource::Biased { p_g, g: GSpec::NarrowHaar { epsilon } } => {
                format!("biased:pg={p_g},g=narrow,eps={epsilon}")
            }
            UnitarySource::Cycle(list) => format!("cycle:{} unitaries of size {}", list.len(), list[0].rows()),
            UnitarySource::Ising { n_qubits, alpha } => format!("ising:alpha={alpha},n={n_qubits}"),
        }
    }

    /// Parses `haar`, `biased:pg=0.5,g=delta`, `biased:pg=0.5,g=narrow,eps=0.1`,
    /// `cycle:<file>`, `cycle:two-qubit-c[=<c>]`, `cycle:xyz` or
    /// `ising:alpha=1.10,n=3`. `local_dim` picks the size of the default
    /// delta unitary.
    pub fn parse(spec: &str, local_dim: usize) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let params = || -> Result<Vec<(String, String)>> {
            rest.split(',')
                .filter(|s| !s.is_empty())
                .map(|kv| {
                    kv.split_once('=')
                        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                        .ok_or_else(|| TwirlError::Parse(format!("expected key=value, got {kv:?}")))
                })
                .collect()
        };
        let num = |key: &str, v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| TwirlError::Parse(format!("bad number for {key}: {v:?}")))
        };
        let source = match kind {
            "haar" => UnitarySource::Haar,
            "biased" => {
                let mut p_g = None;
                let mut g_kind = "delta".to_string();
                let mut eps = GSpec::DEFAULT_EPSILON;
                for (k, v) in params()? {
                    match k.as_str() {
                        "pg" => p_g = Some(num("pg", &v)?),
                        "g" => g_kind = v,
                        "eps" => eps = num("eps", &v)?,
                        _ => return Err(TwirlError::Parse(format!("unknown biased parameter {k:?}"))),
                    }
                }
                let p_g = p_g.ok_or_else(|| TwirlError::Parse("biased source needs pg=".into()))?;
                let g = match g_kind.as_str() {
                    "delta" => GSpec::default_delta(local_dim)?,
                    "narrow" | "narrow-haar" => GSpec::NarrowHaar { epsilon: eps },
                    other => return Err(TwirlError::Parse(format!("unknown g kind {other:?}"))),
                };
                UnitarySource::Biased { p_g, g }
            }
            "cycle" => {
                if rest == "xyz" {
                    crate::twirl::deterministic_schedule(crate::twirl::ScheduleKind::ThreeQubitXyz)
                } else if let Some(cval) = rest.strip_prefix("two-qubit-c") {
                    let cv = match cval.strip_prefix('=') {
                        Some(v) => num("c", v)?,
                        None => crate::twirl::DEFAULT_TWO_QUBIT_C,
                    };
                    crate::twirl::deterministic_schedule(crate::twirl::ScheduleKind::TwoQubitC(cv))
                } else if rest.is_empty() {
                    return Err(TwirlError::Parse("cycle source needs a file".into()));
                } else {
                    let text = std::fs::read_to_string(Path::new(rest))?;
                    UnitarySource::Cycle(matrices_from_json(&text)?)
                }
            }
            "ising" => {
                let mut alpha = None;
                let mut n = None;
                for (k, v) in params()? {
                    match k.as_str() {
                        "alpha" => alpha = Some(num("alpha", &v)?),
                        "n" => {
                            n = Some(v.parse::<usize>().map_err(|_| TwirlError::Parse(format!("bad n: {v:?}")))?)
                        }
                        _ => return Err(TwirlError::Parse(format!("unknown ising parameter {k:?}"))),
                    }
                }
                let n_qubits = n.ok_or_else(|| TwirlError::Parse("ising source needs n=".into()))?;
                let alpha = alpha.unwrap_or(crate::twirl::default_ising_alpha(n_qubits));
                UnitarySource::Ising { n_qubits, alpha }
            }
            other => return Err(TwirlError::Parse(format!("unknown source kind {other:?}"))),
        };
        source.validate()?;
        Ok(source)
    }
}

/// Draws the unitary for iteration `step` from `source`, of size `d×d`.
pub fn draw_unitary(source: &UnitarySource, d: usize, step: usize, rng: &mut RngHandle) -> Result<ComplexMatrix> {
    if let Some(fixed) = source.fixed_dim() {
        if fixed != d {
            return Err(TwirlError::Shape(format!("source produces {fixed}x{fixed} unitaries, need {d}x{d}")));
        }
    }
    match source {
        UnitarySource::Haar => haar_unitary(d, rng),
        UnitarySource::Biased { p_g, g } => {
            // degenerate mixtures consume no coin so p_g = 0 replays the Haar stream
            if *p_g <= 0.0 {
                haar_unitary(d, rng)
            } else if *p_g >= 1.0 || rng.uniform() < *p_g {
                g.sample(d, rng)
            } else {
                haar_unitary(d, rng)
            }
        }
        UnitarySource::Cycle(list) => Ok(list[step % list.len()].clone()),
        UnitarySource::Ising { n_qubits, alpha } => ising_unitary(*n_qubits, *alpha, rng),
    }
}
