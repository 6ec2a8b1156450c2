//! Scenario files: one TOML document per run, validated in full before any
//! computation starts.

use std::path::{Path, PathBuf};

use entropic::dynamics::{free_gaussian_analytic, Method, Potential};
use entropic::field::{Boundary, ComplexField, Field, Grid, Vec3};
use entropic::frames::{FrameTrajectory, GaugeTerm, TabulatedTrajectory};
use entropic::madelung::{compose, State};
use entropic::verify::tolerances;
use entropic::Constants;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::io::read_snapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub grid: GridSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walkers: Option<WalkerSpec>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
    #[serde(default)]
    pub proper_time: ProperTimeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: Vec<usize>,
    pub extents: Vec<f64>,
    /// Lower corner; defaults to centring the box on the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default)]
    pub boundary: BoundarySpec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySpec {
    #[default]
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    pub mass: f64,
    pub hbar: f64,
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        ConstantsSpec { mass: 1.0, hbar: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Minimum-uncertainty packet centred at `x0` with momentum `p0` and
    /// position spread `s0`.
    Gaussian { x0: Vec<f64>, p0: Vec<f64>, s0: f64 },
    /// `e^{ik·x}` normalized over the box.
    PlaneWave { k: Vec<f64> },
    /// A snapshot CSV as written by `evolve`.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Harmonic {
        stiffness: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Linear { slope: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrajectorySpec {
    #[default]
    Rest,
    Boost {
        velocity: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gauge: Option<Vec<f64>>,
    },
    UniformAccel {
        acceleration: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gauge: Option<Vec<f64>>,
    },
    Oscillation {
        amplitude: Vec<f64>,
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gauge: Option<Vec<f64>>,
    },
    /// CSV with a `t` column followed by one column per axis.
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gauge: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Steps between snapshots; defaults to a tenth of the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
}

fn default_method() -> Method {
    Method::SplitStep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerSpec {
    pub count: usize,
    /// Steps between histogram distance records.
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
}

fn default_record_stride() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub transition_invariance: f64,
    pub density_equivalence: f64,
    pub gravity_equivalence: f64,
    pub energy_rate: f64,
    pub energy_drift: f64,
    pub entropy_shift: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            transition_invariance: tolerances::TRANSITION_INVARIANCE,
            density_equivalence: tolerances::DENSITY_EQUIVALENCE,
            gravity_equivalence: tolerances::GRAVITY_EQUIVALENCE,
            energy_rate: tolerances::ENERGY_RATE,
            energy_drift: tolerances::ENERGY_DRIFT,
            entropy_shift: tolerances::ENTROPY_SHIFT_DYNAMICAL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    TransitionInvariance,
    DensityEquivalence,
    GravityEquivalence,
    EntropyShift,
    EnergyCovariance,
    ProperTime,
    RefinementLadder,
}

impl CheckName {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::TransitionInvariance => "transition-invariance",
            CheckName::DensityEquivalence => "density-equivalence",
            CheckName::GravityEquivalence => "gravity-equivalence",
            CheckName::EntropyShift => "entropy-shift",
            CheckName::EnergyCovariance => "energy-covariance",
            CheckName::ProperTime => "proper-time",
            CheckName::RefinementLadder => "refinement-ladder",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub checks: Vec<CheckName>,
    /// Flip the sign of the effective gravitational term in the observer
    /// frame; the equivalence checks must then fail.
    #[serde(default)]
    pub negative_control: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_levels")]
    pub ladder_levels: usize,
}

fn default_samples() -> usize {
    100
}

fn default_levels() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProperTimeSpec {
    pub c_light: f64,
    /// Defaults to the run duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

impl Default for ProperTimeSpec {
    fn default() -> Self {
        ProperTimeSpec {
            c_light: 1.0,
            duration: None,
        }
    }
}

/// A validated scenario with every object built.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub constants: Constants,
    pub psi0: ComplexField,
    pub potential: Potential,
    pub trajectory: FrameTrajectory,
    pub gauge: GaugeTerm,
    pub steps: usize,
    pub snapshot_stride: usize,
    /// SHA-256 of the canonical configuration (output directory excluded).
    pub hash: String,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

fn vec3(field: &str, v: &[f64], dim: usize) -> Result<Vec3, CliError> {
    if v.len() != dim {
        return Err(invalid(field, format!("expected {dim} components, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "components must be finite"));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive (got {v})")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML, the form recorded in manifests.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        toml::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// The grid and constants alone, as needed to read stored snapshots.
    pub fn grid_and_constants(&self) -> Result<(Grid, Constants), CliError> {
        let g = &self.grid;
        let dim = g.points.len();
        if !(1..=3).contains(&dim) {
            return Err(invalid("grid.points", "need one to three axes"));
        }
        if g.extents.len() != dim {
            return Err(invalid("grid.extents", format!("expected {dim} entries")));
        }
        for (a, &l) in g.extents.iter().enumerate() {
            positive(&format!("grid.extents[{a}]"), l)?;
        }
        let origin = match &g.origin {
            Some(o) => vec3("grid.origin", o, dim)?[..dim].to_vec(),
            None => g.extents.iter().map(|l| -0.5 * l).collect(),
        };
        let boundary = match g.boundary {
            BoundarySpec::Periodic => Boundary::Periodic,
            BoundarySpec::Dirichlet => Boundary::DirichletZero,
        };
        let grid = Grid::new(&g.points, &g.extents, &origin, boundary).map_err(|e| invalid("grid", e))?;
        let constants = Constants::new(self.constants.mass, self.constants.hbar).map_err(|e| invalid("constants", e))?;

        Ok((grid, constants))
    }

    /// Validates every field and builds the scenario. Relative file paths
    /// are resolved against `base`.
    pub fn build(self, base: &Path) -> Result<Scenario, CliError> {
        let (grid, constants) = self.grid_and_constants()?;
        let dim = grid.dim();
        let boundary = grid.boundary();

        let r = self.run;
        positive("run.dt", r.dt)?;
        positive("run.duration", r.duration)?;
        let steps = (r.duration / r.dt).round();
        if (steps * r.dt - r.duration).abs() > 1e-9 * r.duration {
            return Err(invalid("run.duration", format!("{} is not a whole number of steps of {}", r.duration, r.dt)));
        }
        let steps = steps as usize;
        let snapshot_stride = match r.snapshot_stride {
            Some(0) => return Err(invalid("run.snapshot_stride", "must be at least 1")),
            Some(s) => s,
            None => (steps / 10).max(1),
        };
        if r.method == Method::SplitStep && boundary != Boundary::Periodic {
            return Err(invalid("run.method", "split-step needs a periodic grid"));
        }
        if let Some(w) = &self.walkers {
            if w.count == 0 {
                return Err(invalid("walkers.count", "must be at least 1"));
            }
            if w.record_stride == 0 {
                return Err(invalid("walkers.record_stride", "must be at least 1"));
            }
        }
        if let Some(v) = &self.verify {
            if v.checks.is_empty() {
                return Err(invalid("verify.checks", "list is empty"));
            }
            if v.samples == 0 {
                return Err(invalid("verify.samples", "must be at least 1"));
            }
            if v.ladder_levels < 2 {
                return Err(invalid("verify.ladder_levels", "must be at least 2"));
            }
        }
        let t = self.tolerances;
        for (name, v) in [
            ("tolerances.transition_invariance", t.transition_invariance),
            ("tolerances.density_equivalence", t.density_equivalence),
            ("tolerances.gravity_equivalence", t.gravity_equivalence),
            ("tolerances.energy_rate", t.energy_rate),
            ("tolerances.energy_drift", t.energy_drift),
            ("tolerances.entropy_shift", t.entropy_shift),
        ] {
            positive(name, v)?;
        }
        positive("proper_time.c_light", self.proper_time.c_light)?;
        if let Some(d) = self.proper_time.duration {
            positive("proper_time.duration", d)?;
        }

        let psi0 = self.initial.psi(&grid, &constants, base)?;

        let potential = match &self.potential {
            PotentialSpec::Zero => Potential::Zero,
            PotentialSpec::Harmonic { stiffness, center } => Potential::Harmonic {
                stiffness: {
                    if !(stiffness.is_finite() && *stiffness >= 0.0) {
                        return Err(invalid("potential.stiffness", "must be non-negative"));
                    }
                    *stiffness
                },
                center: match center {
                    Some(c) => vec3("potential.center", c, dim)?,
                    None => [0.0; 3],
                },
            },
            PotentialSpec::Linear { slope } => Potential::Linear {
                slope: vec3("potential.slope", slope, dim)?,
            },
        };

        let (trajectory, gauge) = self.trajectory.build(dim, base, 1.0)?;
        let hash = self.hash();
        Ok(Scenario {
            config: self,
            grid,
            constants,
            psi0,
            potential,
            trajectory,
            gauge,
            steps,
            snapshot_stride,
            hash,
        })
    }
}

impl InitialSpec {
    /// The initial wavefunction sampled on `grid`.
    pub fn psi(&self, grid: &Grid, constants: &Constants, base: &Path) -> Result<ComplexField, CliError> {
        let dim = grid.dim();
        Ok(match self {
            InitialSpec::Gaussian { x0, p0, s0 } => {
                let x0 = vec3("initial.x0", x0, dim)?;
                let p0 = vec3("initial.p0", p0, dim)?;
                positive("initial.s0", *s0)?;
                free_gaussian_analytic(x0, p0, *s0, 0.0, constants, grid)
            }
            InitialSpec::PlaneWave { k } => {
                let k = vec3("initial.k", k, dim)?;
                let amp = grid.domain_volume().sqrt().recip();
                Field::from_fn(*grid, |x| Complex64::from_polar(amp, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
            }
            InitialSpec::File { path } => {
                let state = read_snapshot(&base.join(path), grid).map_err(|e| invalid("initial.path", e))?;
                compose(&state)
            }
        })
    }
}

impl TrajectorySpec {
    /// Builds the trajectory with its displacement multiplied by `factor`.
    pub fn build(&self, dim: usize, base: &Path, factor: f64) -> Result<(FrameTrajectory, GaugeTerm), CliError> {
        let gauge = |g: &Option<Vec<f64>>| -> Result<GaugeTerm, CliError> {
            Ok(GaugeTerm {
                d: match g {
                    Some(d) => vec3("trajectory.gauge", d, dim)?,
                    None => [0.0; 3],
                },
            })
        };
        let s = |v: Vec3| v.map(|x| x * factor);
        Ok(match self {
            TrajectorySpec::Rest => (FrameTrajectory::Rest, GaugeTerm::zero()),
            TrajectorySpec::Boost { velocity, gauge: d } => (
                FrameTrajectory::Boost {
                    velocity: s(vec3("trajectory.velocity", velocity, dim)?),
                },
                gauge(d)?,
            ),
            TrajectorySpec::UniformAccel { acceleration, gauge: d } => (
                FrameTrajectory::UniformAccel {
                    acceleration: s(vec3("trajectory.acceleration", acceleration, dim)?),
                },
                gauge(d)?,
            ),
            TrajectorySpec::Oscillation { amplitude, omega, gauge: d } => (
                FrameTrajectory::Oscillation {
                    amplitude: s(vec3("trajectory.amplitude", amplitude, dim)?),
                    omega: positive("trajectory.omega", *omega)?,
                },
                gauge(d)?,
            ),
            TrajectorySpec::File { path, gauge: d } => {
                let (times, mut samples) =
                    crate::io::read_trajectory(&base.join(path), dim).map_err(|e| invalid("trajectory.path", e))?;
                for axis in &mut samples {
                    axis.iter_mut().for_each(|x| *x *= factor);
                }
                let tab = TabulatedTrajectory::new(&times, &samples).map_err(|e| invalid("trajectory.path", e))?;
                (FrameTrajectory::Tabulated(tab), gauge(d)?)
            }
        })
    }
}

impl Scenario {
    pub fn initial_state(&self) -> Result<State, CliError> {
        Ok(entropic::madelung::decompose(&self.psi0, 0.0)?.state)
    }
}
