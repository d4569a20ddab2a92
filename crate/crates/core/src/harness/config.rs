//! Run configuration: the experimental parameters of a single case, a flat
//! TOML file format whose keys mirror the CLI flags, and validation.

use std::fmt;
use std::str::FromStr;

use clap::ValueEnum;
use serde::Deserialize;

use crate::assembly::{CoefficientField, RhsSpec};
use crate::elements::Discretization;
use crate::error::{Error, Result};
use crate::krylov::SolverOptions;
use crate::schwarz::{PressureVersion, SchwarzConfig, Variant};

pub const DEFAULT_E: f64 = 6000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DiscKind {
    Fem,
    Sem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Spd,
    Saddle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PrecKind {
    Oas,
    Ohs,
    Oms,
}

impl From<PrecKind> for Variant {
    fn from(p: PrecKind) -> Self {
        match p {
            PrecKind::Oas => Variant::Additive,
            PrecKind::Ohs => Variant::Hybrid,
            PrecKind::Oms => Variant::Multiplicative,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PVersion {
    V1,
    V2,
    V3,
}

impl From<PVersion> for PressureVersion {
    fn from(p: PVersion) -> Self {
        match p {
            PVersion::V1 => PressureVersion::V1,
            PVersion::V2 => PressureVersion::V2,
            PVersion::V3 => PressureVersion::V3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CoeffKind {
    Constant,
    Jump,
    Checkerboard,
    Grid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// PCG for the SPD operator with a symmetric preconditioner, GMRES otherwise.
    #[default]
    Auto,
    Pcg,
    Gmres,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CondMode {
    /// Dense spectrum for small problems, Lanczos estimates from PCG otherwise.
    #[default]
    Auto,
    Dense,
    Lanczos,
    Off,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ErrMode {
    /// Direct reference solve when the system is not too large.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    /// Uniform random load vector from the seed.
    #[default]
    Random,
    /// Constant body force f = (1, 1).
    Unit,
}

impl RhsKind {
    pub fn spec(&self, seed: u64) -> RhsSpec {
        match self {
            RhsKind::Random => RhsSpec::Random { seed },
            RhsKind::Unit => RhsSpec::BodyForce(|_, _| (1.0, 1.0)),
        }
    }
}

/// Coefficient distribution over the subdomains.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientSpec {
    Constant { e: f64, nu: f64 },
    /// 4×4 subdomains, `nu` on the central 2×2 block, 0.3 elsewhere.
    CentralJump { nu: f64 },
    /// 4×4 preset with E = 6000.
    Checkerboard,
    /// Poisson ratios per subdomain, top row first.
    Grid { e: f64, nu: Vec<Vec<f64>> },
}

impl CoefficientSpec {
    pub fn field(&self, nsx: usize, nsy: usize) -> Result<CoefficientField> {
        let f = match self {
            CoefficientSpec::Constant { e, nu } => CoefficientField::constant(nsx, nsy, *e, *nu)?,
            CoefficientSpec::CentralJump { nu } => CoefficientField::central_jump(*nu)?,
            CoefficientSpec::Checkerboard => CoefficientField::checkerboard(),
            CoefficientSpec::Grid { e, nu } => CoefficientField::from_nu_rows(*e, nu)?,
        };
        if (f.nsx, f.nsy) != (nsx, nsy) {
            return Err(Error::Config(format!(
                "coefficient layout is {}x{} but the decomposition is {nsx}x{nsy}",
                f.nsx, f.nsy
            )));
        }
        Ok(f)
    }

    fn label(&self) -> String {
        match self {
            CoefficientSpec::Constant { nu, .. } => format!("nu={nu}"),
            CoefficientSpec::CentralJump { nu } => format!("jump nu={nu}"),
            CoefficientSpec::Checkerboard => "checkerboard".into(),
            CoefficientSpec::Grid { .. } => "grid".into(),
        }
    }
}

/// Fully specified case.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub disc: Discretization,
    pub form: Formulation,
    pub variant: Variant,
    pub levels: usize,
    /// Local pressure space; ignored by the SPD formulation.
    pub version: PressureVersion,
    pub nsx: usize,
    pub nsy: usize,
    /// Elements per subdomain side.
    pub hh: usize,
    /// Overlap in element layers.
    pub overlap: usize,
    pub coeff: CoefficientSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub rhs: RhsKind,
    pub solver: SolverChoice,
    pub cond: CondMode,
    pub err: ErrMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            disc: Discretization::FemQ2P1,
            form: Formulation::Spd,
            variant: Variant::Hybrid,
            levels: 2,
            version: PressureVersion::V2,
            nsx: 2,
            nsy: 2,
            hh: 4,
            overlap: 1,
            coeff: CoefficientSpec::Constant { e: DEFAULT_E, nu: 0.3 },
            tol: 1e-6,
            max_iter: 2000,
            seed: 1,
            rhs: RhsKind::Random,
            solver: SolverChoice::Auto,
            cond: CondMode::Auto,
            err: ErrMode::Auto,
        }
    }
}

impl RunConfig {
    pub fn fem() -> Self {
        Self::default()
    }

    pub fn sem(n: usize) -> Self {
        Self {
            disc: Discretization::Sem(n),
            ..Self::default()
        }
    }

    pub fn spd(mut self, variant: Variant, levels: usize) -> Self {
        self.form = Formulation::Spd;
        self.variant = variant;
        self.levels = levels;
        self
    }

    pub fn saddle(mut self, variant: Variant, levels: usize, version: PressureVersion) -> Self {
        self.form = Formulation::Saddle;
        self.variant = variant;
        self.levels = levels;
        self.version = version;
        self
    }

    pub fn nsub(mut self, n: usize) -> Self {
        self.nsx = n;
        self.nsy = n;
        self
    }

    pub fn hh(mut self, hh: usize) -> Self {
        self.hh = hh;
        self
    }

    pub fn overlap(mut self, k: usize) -> Self {
        self.overlap = k;
        self
    }

    pub fn nu(mut self, nu: f64) -> Self {
        self.coeff = CoefficientSpec::Constant { e: DEFAULT_E, nu };
        self
    }

    pub fn coeff(mut self, coeff: CoefficientSpec) -> Self {
        self.coeff = coeff;
        self
    }

    pub fn solver(mut self, solver: SolverChoice) -> Self {
        self.solver = solver;
        self
    }

    pub fn schwarz(&self) -> SchwarzConfig {
        SchwarzConfig {
            variant: self.variant,
            levels: self.levels,
            version: self.version,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        }
    }

    /// PCG is used when the operator and the preconditioner are symmetric.
    pub fn uses_pcg(&self) -> bool {
        match self.solver {
            SolverChoice::Pcg => true,
            SolverChoice::Gmres => false,
            SolverChoice::Auto => self.form == Formulation::Spd && self.variant != Variant::Multiplicative,
        }
    }

    pub fn solver_name(&self) -> &'static str {
        if self.uses_pcg() {
            "PCG"
        } else {
            "GMRES"
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Discretization::Sem(n) = self.disc {
            if n < 2 {
                return bad(format!("spectral degree must be at least 2, got {n}"));
            }
        }
        if self.nsx == 0 || self.nsy == 0 || self.hh == 0 {
            return bad("subdomain counts and H/h must be positive".into());
        }
        if !(1..=2).contains(&self.levels) {
            return bad(format!("levels must be 1 or 2, got {}", self.levels));
        }
        if self.variant == Variant::Hybrid && self.levels != 2 {
            return bad("the hybrid preconditioner needs two levels".into());
        }
        if self.overlap == 0 || self.overlap >= self.hh {
            return bad(format!("overlap must satisfy 1 <= k < H/h = {}, got {}", self.hh, self.overlap));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        let field = self.coeff.field(self.nsx, self.nsy)?;
        if self.form == Formulation::Spd {
            if let Some(s) = field.materials.iter().position(|m| m.lambda.finite().is_none()) {
                return Err(Error::IncompressibleReformulation { subdomain: s });
            }
        }
        if self.solver == SolverChoice::Pcg {
            if self.form == Formulation::Saddle {
                return bad("PCG needs the SPD formulation; the saddle system is indefinite".into());
            }
            if self.variant == Variant::Multiplicative {
                return bad("PCG needs a symmetric preconditioner; use GMRES with OMS".into());
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let disc = match self.disc {
            Discretization::FemQ2P1 => "fem".to_string(),
            Discretization::Sem(n) => format!("sem{n}"),
        };
        let form = match self.form {
            Formulation::Spd => "spd".to_string(),
            Formulation::Saddle => format!("saddle-{:?}", self.version).to_lowercase(),
        };
        format!(
            "{disc} {form} {}-{}({}) N={}x{} H/h={} k={} {}",
            self.solver_name(),
            self.variant.short_name(),
            self.levels,
            self.nsx,
            self.nsy,
            self.hh,
            self.overlap,
            self.coeff.label()
        )
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Subdomain grid written as `NxM` (or a single `N` for `NxN`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Nsub(pub usize, pub usize);

impl FromStr for Nsub {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad subdomain grid '{s}', expected NxN")))
        };
        match s.split_once(['x', 'X']) {
            Some((a, b)) => Ok(Nsub(parse(a)?, parse(b)?)),
            None => {
                let n = parse(s)?;
                Ok(Nsub(n, n))
            }
        }
    }
}

impl<'de> Deserialize<'de> for Nsub {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Partially specified case, as read from a config file or the command line.
/// Later sources override earlier ones through [`RunSpec::merge`].
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunSpec {
    pub disc: Option<DiscKind>,
    pub degree: Option<usize>,
    pub form: Option<Formulation>,
    pub prec: Option<PrecKind>,
    pub levels: Option<usize>,
    pub pversion: Option<PVersion>,
    pub nsub: Option<Nsub>,
    pub hh: Option<usize>,
    pub overlap: Option<usize>,
    pub nu: Option<f64>,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    pub coeff: Option<CoeffKind>,
    /// Poisson ratios per subdomain for `coeff = "grid"`, top row first.
    pub nu_grid: Option<Vec<Vec<f64>>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub rhs: Option<RhsKind>,
    pub solver: Option<SolverChoice>,
    pub cond: Option<CondMode>,
    pub err: Option<ErrMode>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn merge(mut self, other: RunSpec) -> Self {
        merge_fields!(self, other; disc, degree, form, prec, levels, pversion, nsub, hh, overlap,
            nu, e, coeff, nu_grid, tol, max_iter, seed, rhs, solver, cond, err);
        self
    }

    pub fn into_config(self) -> Result<RunConfig> {
        let d = RunConfig::default();
        let disc = match (self.disc.unwrap_or(DiscKind::Fem), self.degree) {
            (DiscKind::Fem, None | Some(2)) => Discretization::FemQ2P1,
            (DiscKind::Fem, Some(n)) => {
                return Err(Error::Config(format!("the finite element family is Q2-P1, got degree {n}")))
            }
            (DiscKind::Sem, n) => Discretization::Sem(n.unwrap_or(3)),
        };
        let form = self.form.unwrap_or(Formulation::Spd);
        if form == Formulation::Spd && self.pversion.is_some() {
            return Err(Error::Config("pressure versions apply to the saddle formulation only".into()));
        }
        let e = self.e.unwrap_or(DEFAULT_E);
        let nsub = self.nsub.unwrap_or(Nsub(d.nsx, d.nsy));
        let coeff_kind = self.coeff.unwrap_or(if self.nu_grid.is_some() {
            CoeffKind::Grid
        } else {
            CoeffKind::Constant
        });
        let fixed_e = matches!(coeff_kind, CoeffKind::Jump | CoeffKind::Checkerboard);
        let ignored = [
            ("nu", self.nu.is_some() && matches!(coeff_kind, CoeffKind::Checkerboard | CoeffKind::Grid)),
            ("nu-grid", self.nu_grid.is_some() && coeff_kind != CoeffKind::Grid),
            ("E", self.e.is_some() && fixed_e),
        ];
        if let Some((key, _)) = ignored.iter().find(|(_, hit)| *hit) {
            return Err(Error::Config(format!(
                "{key} does not apply to coeff = {}",
                format!("{coeff_kind:?}").to_lowercase()
            )));
        }
        let coeff = match coeff_kind {
            CoeffKind::Constant => CoefficientSpec::Constant {
                e,
                nu: self.nu.unwrap_or(0.3),
            },
            CoeffKind::Jump => CoefficientSpec::CentralJump {
                nu: self.nu.unwrap_or(0.4999),
            },
            CoeffKind::Checkerboard => CoefficientSpec::Checkerboard,
            CoeffKind::Grid => CoefficientSpec::Grid {
                e,
                nu: self
                    .nu_grid
                    .ok_or_else(|| Error::Config("coeff = grid needs nu-grid".into()))?,
            },
        };
        let levels = self.levels.unwrap_or(2);
        let variant = self.prec.map(Variant::from).unwrap_or(if levels == 2 {
            Variant::Hybrid
        } else {
            Variant::Additive
        });
        let config = RunConfig {
            disc,
            form,
            variant,
            levels,
            version: self.pversion.map(PressureVersion::from).unwrap_or(PressureVersion::V2),
            nsx: nsub.0,
            nsy: nsub.1,
            hh: self.hh.unwrap_or(d.hh),
            overlap: self.overlap.unwrap_or(d.overlap),
            coeff,
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            seed: self.seed.unwrap_or(d.seed),
            rhs: self.rhs.unwrap_or_default(),
            solver: self.solver.unwrap_or_default(),
            cond: self.cond.unwrap_or_default(),
            err: self.err.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }
}
